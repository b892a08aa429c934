//! Gnuplot script generation for training-curve CSVs.
//!
//! The emitted script is plain gnuplot: loss curves in the top panel, test
//! accuracy in the bottom one, both read straight from the per-run CSVs
//! (`every ::1` skips the header row).

/// One curve: a CSV produced by [`super::emit_csv`] plus its legend title.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotSeries {
    pub title: String,
    pub csv_path: String,
}

/// Doubles single quotes, the gnuplot escape inside a quoted string.
fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Renders a standalone gnuplot script plotting every series' loss and
/// accuracy over epochs into `png_name`.
pub fn curves_script(series: &[PlotSeries], png_name: &str) -> String {
    let mut out = String::new();
    out.push_str("# Training curves: loss on top, test accuracy below.\n");
    out.push_str("set datafile separator ','\n");
    out.push_str("set terminal pngcairo size 900,700\n");
    out.push_str(&format!("set output {}\n", quote(png_name)));
    out.push_str("set multiplot layout 2,1\n");
    out.push_str("set xlabel 'epoch'\n");
    out.push_str("set key right top\n");

    let plot_line = |col: usize| {
        let clauses: Vec<String> = series
            .iter()
            .map(|s| {
                format!(
                    "{} every ::1 using 1:{} with lines title {}",
                    quote(&s.csv_path),
                    col,
                    quote(&s.title)
                )
            })
            .collect();
        format!("plot {}\n", clauses.join(", \\\n     "))
    };

    out.push_str("set ylabel 'train loss'\n");
    out.push_str(&plot_line(2));
    out.push_str("set ylabel 'test accuracy'\n");
    out.push_str("set yrange [0:1]\n");
    out.push_str(&plot_line(3));
    out.push_str("unset multiplot\n");
    out
}
