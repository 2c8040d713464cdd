use serde::Serialize;

use super::{
    axis_angle, backproject, intersect_lines, residual, segment_to_line, GeometryError,
    GeometryParams, HomogeneousPoint, LineSegment,
};

/// A vanishing-point candidate proposed by one segment pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VpHypothesis {
    pub point: HomogeneousPoint,
    pub support_count: usize,
    /// Summed length of the consistent segments.
    pub support_length: f64,
    /// Indices into the input segment list, ascending.
    pub member_ids: Vec<usize>,
    pub mean_residual: f64,
    /// The generating pair, as input indices.
    pub source_pair: (usize, usize),
}

/// Indices of segments ordered by descending length; ties keep input order.
pub(crate) fn longest_first(segments: &[LineSegment]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by(|&a, &b| {
        segments[b]
            .length()
            .total_cmp(&segments[a].length())
            .then(a.cmp(&b))
    });
    order
}

pub(crate) fn score_point(
    point: HomogeneousPoint,
    segments: &[LineSegment],
    tau: f64,
    source_pair: (usize, usize),
) -> VpHypothesis {
    let mut member_ids = Vec::new();
    let mut support_length = 0.0;
    let mut residual_sum = 0.0;
    for (i, s) in segments.iter().enumerate() {
        let r = residual(s, &point);
        if r <= tau {
            member_ids.push(i);
            support_length += s.length();
            residual_sum += r;
        }
    }
    let support_count = member_ids.len();
    VpHypothesis {
        point,
        support_count,
        support_length,
        mean_residual: if support_count > 0 {
            residual_sum / support_count as f64
        } else {
            0.0
        },
        member_ids,
        source_pair,
    }
}

/// Exhaustive two-line search: every unordered pair among the
/// `max_segments` longest segments proposes its intersection, scored against
/// all segments. Proposals closer than `dedup_angle` on the viewing sphere
/// collapse onto the better-supported one. Sorted by descending support
/// length; ties go to the earlier pair in longest-first order.
pub fn hypothesize_vps(
    segments: &[LineSegment],
    params: &GeometryParams,
) -> Result<Vec<VpHypothesis>, GeometryError> {
    if segments.len() < 2 {
        return Err(GeometryError::TooFewSegments(segments.len()));
    }
    let tau = params.tau_support();
    let order = longest_first(segments);
    let pool = &order[..order.len().min(params.max_segments)];
    let lines: Vec<_> = pool.iter().map(|&i| segment_to_line(&segments[i])).collect();

    let mut candidates = Vec::with_capacity(pool.len() * (pool.len() - 1) / 2);
    for a in 0..pool.len() {
        for b in (a + 1)..pool.len() {
            let Ok(point) = intersect_lines(&lines[a], &lines[b]) else {
                continue;
            };
            candidates.push(score_point(point, segments, tau, (pool[a], pool[b])));
        }
    }
    // Stable sort keeps generation order among equal supports.
    candidates.sort_by(|x, y| y.support_length.total_cmp(&x.support_length));

    let dedup = params.dedup_angle_deg.to_radians();
    let cam = &params.camera;
    let mut kept: Vec<VpHypothesis> = Vec::new();
    let mut kept_dirs = Vec::new();
    for c in candidates {
        let d = backproject(&c.point, cam);
        if kept_dirs.iter().all(|k| axis_angle(*k, d) >= dedup) {
            kept_dirs.push(d);
            kept.push(c);
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{NormalizedPoint, ZERO_EPS};

    fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> LineSegment {
        LineSegment::from_coords(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn too_few_segments() {
        let p = GeometryParams::default();
        assert_eq!(
            hypothesize_vps(&[seg(0.0, 0.0, 1.0, 0.0)], &p),
            Err(GeometryError::TooFewSegments(1))
        );
    }

    #[test]
    fn three_concurrent_segments() {
        let vp = NormalizedPoint::new(0.3, -0.1);
        let segs: Vec<_> = [(0.9, 0.5), (-0.6, 0.4), (-0.2, -0.9)]
            .iter()
            .map(|&(x, y)| {
                let mid = NormalizedPoint::new((x + vp.x) / 2.0, (y + vp.y) / 2.0);
                seg(x, y, mid.x, mid.y)
            })
            .collect();
        let hyps = hypothesize_vps(&segs, &GeometryParams::default()).unwrap();
        let top = &hyps[0];
        let e = top.point.euclidean().unwrap();
        assert!(e.distance(vp) < 1e-6, "{e:?}");
        assert_eq!(top.support_count, 3);
        assert_eq!(top.member_ids, vec![0, 1, 2]);
    }

    #[test]
    fn parallel_bundles_give_points_at_infinity() {
        let segs = vec![
            seg(-0.5, 0.2, 0.5, 0.2),
            seg(-0.5, -0.3, 0.5, -0.3),
            seg(0.7, -0.4, 0.7, 0.4),
            seg(-0.8, -0.45, -0.8, 0.45),
        ];
        let hyps = hypothesize_vps(&segs, &GeometryParams::default()).unwrap();
        let inf: Vec<_> = hyps
            .iter()
            .filter(|h| h.point.is_at_infinity())
            .map(|h| h.point.as_array())
            .collect();
        assert_eq!(inf.len(), 2, "{inf:?}");
        let near = |a: [f64; 3], b: [f64; 3]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(inf.iter().any(|p| near(*p, [1.0, 0.0, 0.0])));
        assert!(inf.iter().any(|p| near(*p, [0.0, 1.0, 0.0])), "{inf:?}");
        assert!(near(hyps[0].point.as_array(), [1.0, 0.0, 0.0]));
    }

    #[test]
    fn output_sorted_and_deduplicated() {
        let segs: Vec<_> = (0..12)
            .map(|i| {
                let a = i as f64 * 0.5;
                seg(a.cos() * 0.1, a.sin() * 0.1, a.cos() * 0.9 + 0.05 * i as f64, a.sin() * 0.8)
            })
            .collect();
        let p = GeometryParams::default();
        let hyps = hypothesize_vps(&segs, &p).unwrap();
        for w in hyps.windows(2) {
            assert!(w[0].support_length >= w[1].support_length);
        }
        let dirs: Vec<_> = hyps.iter().map(|h| backproject(&h.point, &p.camera)).collect();
        for i in 0..dirs.len() {
            for j in (i + 1)..dirs.len() {
                assert!(axis_angle(dirs[i], dirs[j]) >= p.dedup_angle_deg.to_radians() - ZERO_EPS);
            }
        }
        for h in &hyps {
            assert!(h.support_count >= 2);
            assert_eq!(h.support_count, h.member_ids.len());
            assert!(h.member_ids.contains(&h.source_pair.0));
            assert!(h.member_ids.contains(&h.source_pair.1));
        }
    }

    #[test]
    fn max_segments_limits_pairs_but_not_support() {
        let segs = vec![
            seg(-0.9, 0.0, 0.9, 0.0),
            seg(-0.9, 0.5, 0.9, 0.5),
            seg(-0.1, -0.5, 0.1, -0.5),
        ];
        let p = GeometryParams {
            max_segments: 2,
            ..GeometryParams::default()
        };
        let hyps = hypothesize_vps(&segs, &p).unwrap();
        assert_eq!(hyps.len(), 1);
        assert_eq!(hyps[0].member_ids, vec![0, 1, 2]);
    }
}
