use serde::Serialize;

use super::{
    axis_angle, backproject, cross, dot, norm, normalize, project_direction, residual, scale, GeometryParams,
    HomogeneousPoint, LineSegment, Vec3, VpHypothesis,
};

/// Where a frame axis came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AxisOrigin {
    /// Index into the hypothesis list.
    Hypothesis(usize),
    /// Cross product of the other two axes.
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameAxis {
    /// Unit 3D direction in camera coordinates.
    pub direction: Vec3,
    pub vp: HomogeneousPoint,
    pub origin: AxisOrigin,
    pub support_count: usize,
    pub support_length: f64,
    /// Segments assigned to this axis and no other.
    pub member_ids: Vec<usize>,
    pub mean_residual: f64,
}

/// Three mutually orthogonal scene directions with their image vanishing points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManhattanFrame {
    pub axes: [FrameAxis; 3],
    /// Summed support length of the three axes; each segment counts once.
    pub score: f64,
    pub mean_residual: f64,
}

impl ManhattanFrame {
    pub fn directions(&self) -> [Vec3; 3] {
        [
            self.axes[0].direction,
            self.axes[1].direction,
            self.axes[2].direction,
        ]
    }

    pub fn vps(&self) -> [HomogeneousPoint; 3] {
        [self.axes[0].vp, self.axes[1].vp, self.axes[2].vp]
    }
}

/// Symmetric orthonormalization of two nearly orthogonal unit vectors: the
/// correction is split evenly between them.
fn orthonormalize_pair(a: Vec3, b: Vec3) -> (Vec3, Vec3) {
    let sum = normalize([a[0] + b[0], a[1] + b[1], a[2] + b[2]]).expect("near-orthogonal pair");
    let diff = normalize([a[0] - b[0], a[1] - b[1], a[2] - b[2]]).expect("near-orthogonal pair");
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let a2 = [
        (sum[0] + diff[0]) * h,
        (sum[1] + diff[1]) * h,
        (sum[2] + diff[2]) * h,
    ];
    let b2 = [
        (sum[0] - diff[0]) * h,
        (sum[1] - diff[1]) * h,
        (sum[2] - diff[2]) * h,
    ];
    (a2, b2)
}

/// Each segment goes to its lowest-residual consistent axis (lowest index on ties).
fn assign_exclusive(
    vps: &[HomogeneousPoint; 3],
    segments: &[LineSegment],
    tau: f64,
) -> [(Vec<usize>, f64, f64); 3] {
    let mut out: [(Vec<usize>, f64, f64); 3] = Default::default();
    for (i, s) in segments.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (k, vp) in vps.iter().enumerate() {
            let r = residual(s, vp);
            if r <= tau && best.is_none_or(|(_, br)| r < br) {
                best = Some((k, r));
            }
        }
        if let Some((k, r)) = best {
            out[k].0.push(i);
            out[k].1 += s.length();
            out[k].2 += r;
        }
    }
    out
}

/// The first `top_k` hypotheses, in support order, whose directions are more
/// than `tol_ortho` apart from every stronger one already taken. Indices refer
/// to `hyps`.
fn distinct_top(hyps: &[VpHypothesis], params: &GeometryParams) -> (Vec<usize>, Vec<Vec3>) {
    let tol = params.tol_ortho_deg.to_radians();
    let (mut picked, mut dirs) = (Vec::new(), Vec::new());
    for (i, h) in hyps.iter().enumerate() {
        if picked.len() == params.top_k {
            break;
        }
        let d = backproject(&h.point, &params.camera);
        if dirs.iter().all(|&e| axis_angle(d, e) > tol) {
            picked.push(i);
            dirs.push(d);
        }
    }
    (picked, dirs)
}

/// Searches pairs among the top-K distinct hypotheses whose back-projected
/// directions are orthogonal within `tol_ortho`, completes each with the cross product,
/// and keeps the frame with the largest exclusive support. Ties go to the
/// lower mean residual, then to the earlier hypothesis pair.
pub fn complete_manhattan(
    hyps: &[VpHypothesis],
    segments: &[LineSegment],
    params: &GeometryParams,
) -> Option<ManhattanFrame> {
    let cam = &params.camera;
    let tau = params.tau_support();
    let max_cos = params.tol_ortho_deg.to_radians().sin();
    let (picked, dirs) = distinct_top(hyps, params);
    let top: Vec<&VpHypothesis> = picked.iter().map(|&i| &hyps[i]).collect();

    let mut best: Option<ManhattanFrame> = None;
    for i in 0..top.len() {
        for j in (i + 1)..top.len() {
            if dot(dirs[i], dirs[j]).abs() > max_cos {
                continue;
            }
            let (a, b) = orthonormalize_pair(dirs[i], dirs[j]);
            let c = cross(a, b);
            let Ok(third) = project_direction(c, cam) else {
                continue;
            };
            let vps = [top[i].point, top[j].point, third];
            let assigned = assign_exclusive(&vps, segments, tau);
            let score: f64 = assigned.iter().map(|x| x.1).sum();
            let count: usize = assigned.iter().map(|x| x.0.len()).sum();
            let mean_residual = if count > 0 {
                assigned.iter().map(|x| x.2).sum::<f64>() / count as f64
            } else {
                0.0
            };
            let better = match &best {
                None => true,
                Some(b) => score > b.score || (score == b.score && mean_residual < b.mean_residual),
            };
            if !better {
                continue;
            }
            let origins = [
                AxisOrigin::Hypothesis(picked[i]),
                AxisOrigin::Hypothesis(picked[j]),
                AxisOrigin::Completed,
            ];
            let directions = [a, b, c];
            let axes = std::array::from_fn(|k| {
                let (members, length, rsum) = &assigned[k];
                FrameAxis {
                    direction: canonical_unit(directions[k]),
                    vp: vps[k],
                    origin: origins[k],
                    support_count: members.len(),
                    support_length: *length,
                    mean_residual: if members.is_empty() {
                        0.0
                    } else {
                        rsum / members.len() as f64
                    },
                    member_ids: members.clone(),
                }
            });
            best = Some(ManhattanFrame {
                axes,
                score,
                mean_residual,
            });
        }
    }
    best
}

fn canonical_unit(d: Vec3) -> Vec3 {
    let d = scale(d, 1.0 / norm(d));
    super::canonical_sign(d)
}
