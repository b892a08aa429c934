//! Frame temporal-information metrics.
//!
//! Quantifies how much information consecutive video frames share, from
//! per-frame object annotations alone. Two ingredients:
//!
//! * **Between frames**: per tracked object, the fraction of its
//!   previous-frame footprint still covered by its next-frame footprint,
//!   summed over the objects present in both frames. 1.0 per object for a
//!   static scene, 0.0 once an object has fully moved off its old footprint.
//! * **Within a frame**: a mutual-information-style score over unordered
//!   object pairs. Overlapping pairs contribute
//!   `r_both * ln(r_both / (r_a * r_b))`, disjoint pairs contribute
//!   `ln((r_a + r_b) * ln((r_a + r_b) / (r_a * r_b)))`, where each `r` is the
//!   object's share of the frame area. Disjoint-pair terms may be negative;
//!   that weakening is intended.
//!
//! The total for a frame transition is the between-frame term plus the
//! within-frame term of the *next* frame (the frame under analysis). All
//! logarithms are natural. Sums run in annotation order, so results are
//! bit-reproducible for a given document.

pub mod annot;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TinfoError {
    #[error("frame dimensions must be positive and finite")]
    ZeroFrameArea,
    #[error("object {object_id} has a non-positive or non-finite area")]
    ZeroObjectArea { object_id: String },
    #[error("object {object_id} does not fit inside the frame")]
    OutOfBounds { object_id: String },
    #[error("object id {object_id} appears more than once in the frame")]
    DuplicateObjectId { object_id: String },
    #[error("previous-frame area ratio must be positive")]
    ZeroPrevRatio,
    #[error("overlap ratio {overlap} exceeds previous-frame ratio {prev}")]
    OverlapExceedsPrev { prev: f64, overlap: f64 },
    #[error("frames have different dimensions")]
    DimensionMismatch,
    #[error("disjoint-pair score undefined for ratios {ra} and {rb}")]
    NonPositiveInner { ra: f64, rb: f64 },
}

/// Where an object sits in its frame.
///
/// A `Box` carries full geometry. An `Area` carries size only; objects
/// described this way are treated as intersecting nothing, so they always
/// land in the disjoint branch of the pair metrics and contribute no
/// between-frame overlap.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Region {
    Box {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },
    Area {
        area: f64,
    },
}

impl Region {
    pub fn area(&self) -> f64 {
        match *self {
            Region::Box { width, height, .. } => width * height,
            Region::Area { area } => area,
        }
    }
}

/// Intersection area of two regions; zero when either lacks geometry.
fn intersection_area(a: &Region, b: &Region) -> f64 {
    match (a, b) {
        (
            &Region::Box {
                x: ax,
                y: ay,
                width: aw,
                height: ah,
            },
            &Region::Box {
                x: bx,
                y: by,
                width: bw,
                height: bh,
            },
        ) => {
            let w = (ax + aw).min(bx + bw) - ax.max(bx);
            let h = (ay + ah).min(by + bh) - ay.max(by);
            if w > 0.0 && h > 0.0 {
                w * h
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameObject {
    pub object_id: String,
    pub label: String,
    pub region: Region,
}

/// One annotated frame: dimensions plus its objects, validated on
/// construction so every object has positive area, fits in the frame, and
/// carries a unique id.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameScene {
    frame_width: f64,
    frame_height: f64,
    objects: Vec<FrameObject>,
}

impl FrameScene {
    pub fn new(
        frame_width: f64,
        frame_height: f64,
        objects: Vec<FrameObject>,
    ) -> Result<Self, TinfoError> {
        if !(frame_width > 0.0 && frame_height > 0.0)
            || !frame_width.is_finite()
            || !frame_height.is_finite()
        {
            return Err(TinfoError::ZeroFrameArea);
        }
        let frame_area = frame_width * frame_height;
        for (i, obj) in objects.iter().enumerate() {
            let area = obj.region.area();
            if !area.is_finite() || area <= 0.0 {
                return Err(TinfoError::ZeroObjectArea {
                    object_id: obj.object_id.clone(),
                });
            }
            let fits = match obj.region {
                Region::Box {
                    x,
                    y,
                    width,
                    height,
                } => x >= 0.0 && y >= 0.0 && x + width <= frame_width && y + height <= frame_height,
                Region::Area { area } => area <= frame_area,
            };
            if !fits {
                return Err(TinfoError::OutOfBounds {
                    object_id: obj.object_id.clone(),
                });
            }
            if objects[..i].iter().any(|o| o.object_id == obj.object_id) {
                return Err(TinfoError::DuplicateObjectId {
                    object_id: obj.object_id.clone(),
                });
            }
        }
        Ok(FrameScene {
            frame_width,
            frame_height,
            objects,
        })
    }

    pub fn frame_width(&self) -> f64 {
        self.frame_width
    }

    pub fn frame_height(&self) -> f64 {
        self.frame_height
    }

    pub fn frame_area(&self) -> f64 {
        self.frame_width * self.frame_height
    }

    pub fn objects(&self) -> &[FrameObject] {
        &self.objects
    }

    fn object_by_id(&self, id: &str) -> Option<&FrameObject> {
        self.objects.iter().find(|o| o.object_id == id)
    }
}

/// Per-transition score breakdown. The two within-frame components always
/// sum exactly to `t_within`, and `t_total = t_between + t_within`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TemporalInfoReport {
    pub t_between: f64,
    pub t_within_overlap: f64,
    pub t_within_disjoint: f64,
    pub t_within: f64,
    pub t_total: f64,
}

/// Share of the frame occupied by one object, in (0, 1].
pub fn area_ratio(object: &FrameObject, scene: &FrameScene) -> f64 {
    object.region.area() / scene.frame_area()
}

/// Fraction of an object's previous-frame footprint still covered in the
/// next frame: `overlap_ratio / prev_ratio`, in [0, 1].
pub fn between_frame_object(prev_ratio: f64, overlap_ratio: f64) -> Result<f64, TinfoError> {
    if prev_ratio.is_nan() || prev_ratio <= 0.0 {
        return Err(TinfoError::ZeroPrevRatio);
    }
    if overlap_ratio.is_nan() || overlap_ratio < 0.0 || overlap_ratio > prev_ratio {
        return Err(TinfoError::OverlapExceedsPrev {
            prev: prev_ratio,
            overlap: overlap_ratio,
        });
    }
    Ok(overlap_ratio / prev_ratio)
}

/// Between-frame temporal information: the sum of [`between_frame_object`]
/// over every object id present in both frames, using the geometric
/// intersection of the object's two boxes. Ids present in only one frame
/// contribute nothing. Terms are summed in `prev`'s annotation order.
pub fn between_frames(prev: &FrameScene, next: &FrameScene) -> Result<f64, TinfoError> {
    if prev.frame_width != next.frame_width || prev.frame_height != next.frame_height {
        return Err(TinfoError::DimensionMismatch);
    }
    let frame_area = prev.frame_area();
    let mut total = 0.0;
    for p in prev.objects() {
        let Some(n) = next.object_by_id(&p.object_id) else {
            continue;
        };
        let prev_ratio = p.region.area() / frame_area;
        let overlap_ratio = intersection_area(&p.region, &n.region) / frame_area;
        // The intersection sits inside the previous box, so the precondition
        // holds whenever the scenes validated.
        total += between_frame_object(prev_ratio, overlap_ratio)?;
    }
    Ok(total)
}

/// Score for one overlapping pair: `r_both * ln(r_both / (r_a * r_b))`,
/// with a zero overlap contributing zero.
pub fn overlap_pair_info(r_a: f64, r_b: f64, r_both: f64) -> f64 {
    if r_both == 0.0 {
        0.0
    } else {
        r_both * (r_both / (r_a * r_b)).ln()
    }
}

/// Score for one disjoint pair: `ln(r_union * ln(r_union / (r_a * r_b)))`
/// with `r_union = r_a + r_b`. For ratios in (0, 1] the inner product is
/// strictly positive, so the outer log is defined; the result itself may be
/// negative.
pub fn disjoint_pair_info(r_a: f64, r_b: f64) -> Result<f64, TinfoError> {
    let r_union = r_a + r_b;
    let inner = r_union * (r_union / (r_a * r_b)).ln();
    if inner.is_nan() || inner <= 0.0 {
        return Err(TinfoError::NonPositiveInner { ra: r_a, rb: r_b });
    }
    Ok(inner.ln())
}

/// Within-frame information from overlapping pairs: [`overlap_pair_info`]
/// summed over unordered distinct pairs with positive intersection, in
/// annotation order.
pub fn within_frame_overlapping(scene: &FrameScene) -> f64 {
    let frame_area = scene.frame_area();
    let objs = scene.objects();
    let mut total = 0.0;
    for i in 0..objs.len() {
        for j in i + 1..objs.len() {
            let r_both = intersection_area(&objs[i].region, &objs[j].region) / frame_area;
            if r_both > 0.0 {
                let r_a = objs[i].region.area() / frame_area;
                let r_b = objs[j].region.area() / frame_area;
                total += overlap_pair_info(r_a, r_b, r_both);
            }
        }
    }
    total
}

/// Within-frame information from disjoint pairs: [`disjoint_pair_info`]
/// summed over unordered distinct pairs with zero intersection, in
/// annotation order.
pub fn within_frame_disjoint(scene: &FrameScene) -> Result<f64, TinfoError> {
    let frame_area = scene.frame_area();
    let objs = scene.objects();
    let mut total = 0.0;
    for i in 0..objs.len() {
        for j in i + 1..objs.len() {
            if intersection_area(&objs[i].region, &objs[j].region) == 0.0 {
                let r_a = objs[i].region.area() / frame_area;
                let r_b = objs[j].region.area() / frame_area;
                total += disjoint_pair_info(r_a, r_b)?;
            }
        }
    }
    Ok(total)
}

/// Total within-frame information: overlapping plus disjoint pair terms.
pub fn within_frame(scene: &FrameScene) -> Result<f64, TinfoError> {
    Ok(within_frame_overlapping(scene) + within_frame_disjoint(scene)?)
}

/// Full report for the transition `prev -> next`. The within-frame terms are
/// evaluated on `next`, the frame under analysis.
pub fn total_temporal_info(
    prev: &FrameScene,
    next: &FrameScene,
) -> Result<TemporalInfoReport, TinfoError> {
    let t_between = between_frames(prev, next)?;
    let t_within_overlap = within_frame_overlapping(next);
    let t_within_disjoint = within_frame_disjoint(next)?;
    let t_within = t_within_overlap + t_within_disjoint;
    Ok(TemporalInfoReport {
        t_between,
        t_within_overlap,
        t_within_disjoint,
        t_within,
        t_total: t_between + t_within,
    })
}

/// Reports for every consecutive pair in a frame sequence.
pub fn sequence_reports(scenes: &[FrameScene]) -> Result<Vec<TemporalInfoReport>, TinfoError> {
    scenes
        .windows(2)
        .map(|w| total_temporal_info(&w[0], &w[1]))
        .collect()
}

/// Field-wise mean of a set of reports; `None` when the set is empty.
pub fn aggregate_report(reports: &[TemporalInfoReport]) -> Option<TemporalInfoReport> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    let mut sum = TemporalInfoReport {
        t_between: 0.0,
        t_within_overlap: 0.0,
        t_within_disjoint: 0.0,
        t_within: 0.0,
        t_total: 0.0,
    };
    for r in reports {
        sum.t_between += r.t_between;
        sum.t_within_overlap += r.t_within_overlap;
        sum.t_within_disjoint += r.t_within_disjoint;
        sum.t_within += r.t_within;
        sum.t_total += r.t_total;
    }
    Some(TemporalInfoReport {
        t_between: sum.t_between / n,
        t_within_overlap: sum.t_within_overlap / n,
        t_within_disjoint: sum.t_within_disjoint / n,
        t_within: sum.t_within / n,
        t_total: sum.t_total / n,
    })
}
