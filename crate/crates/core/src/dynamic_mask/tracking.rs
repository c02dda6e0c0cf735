use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::MaskError;
use crate::geometry::FlowField;
use crate::raster::BinaryMask;

/// Up to `k` dynamic pixels drawn uniformly without replacement, returned in
/// row-major order. Deterministic for a given `seed`.
pub fn sample_dynamic_points(mask: &BinaryMask, k: usize, seed: u64) -> Vec<(usize, usize)> {
    let w = mask.width();
    let dynamic: Vec<usize> = mask
        .data()
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect();
    let mut chosen: Vec<usize> = if dynamic.len() <= k {
        dynamic
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, dynamic.len(), k)
            .into_iter()
            .map(|i| dynamic[i])
            .collect()
    };
    chosen.sort_unstable();
    chosen.into_iter().map(|i| (i % w, i / w)).collect()
}

/// Flows available for stepping from frame `f` to `f - 1`.
///
/// `backward[f]` maps frame `f` to `f - 1`; `forward[f]` maps `f` to `f + 1`.
/// A backward hop prefers the backward field and otherwise inverts the
/// forward field of the previous frame by fixed-point iteration.
#[derive(Debug, Clone, Copy)]
pub struct FlowChain<'a> {
    pub forward: &'a [Option<FlowField>],
    pub backward: &'a [Option<FlowField>],
    /// Tracks die when the bilinear taps they sample disagree by more than
    /// this many pixels (L1), i.e. when they straddle a motion boundary.
    pub max_spread: f64,
}

const INVERSION_ITERS: usize = 30;

impl FlowChain<'_> {
    fn has_hop(&self, frame: usize) -> bool {
        frame > 0
            && (self.backward.get(frame).is_some_and(Option::is_some)
                || self.forward.get(frame - 1).is_some_and(Option::is_some))
    }

    fn sample(&self, f: &FlowField, u: f64, v: f64) -> Option<(f64, f64)> {
        let (d, spread) = f.sample(u, v)?;
        (spread <= self.max_spread).then_some(d)
    }

    /// Position at `frame - 1` of the point at `(u, v)` in `frame`, or
    /// `None` when the track is lost.
    fn hop(&self, frame: usize, (u, v): (f64, f64)) -> Result<Option<(f64, f64)>, MaskError> {
        if let Some(Some(b)) = self.backward.get(frame) {
            return Ok(self.sample(b, u, v).map(|(du, dv)| (u + du, v + dv)));
        }
        let Some(Some(f)) = frame.checked_sub(1).and_then(|p| self.forward.get(p)) else {
            return Err(MaskError::MissingFlowHop { frame });
        };
        // Solve q + F(q) = p.
        let Some((du, dv)) = self.sample(f, u, v) else {
            return Ok(None);
        };
        let mut q = (u - du, v - dv);
        for _ in 0..INVERSION_ITERS {
            let Some((du, dv)) = self.sample(f, q.0, q.1) else {
                return Ok(None);
            };
            let next = (u - du, v - dv);
            let step = (next.0 - q.0).abs() + (next.1 - q.1).abs();
            q = next;
            if step < 1e-9 {
                break;
            }
        }
        Ok(Some(q))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub origin_frame: usize,
    /// Continuous position in the origin frame.
    pub start: (f64, f64),
    /// Continuous position at frame 0 (last known position if dead).
    pub position: (f64, f64),
    pub alive: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackedPointSet {
    pub tracks: Vec<Track>,
}

impl TrackedPointSet {
    /// Integer pixels at frame 0 of every surviving track.
    pub fn seeds(&self, width: usize, height: usize) -> Vec<(usize, usize)> {
        self.tracks
            .iter()
            .filter(|t| t.alive)
            .filter_map(|t| {
                let (u, v) = t.position;
                (u >= 0.0 && v >= 0.0 && u < width as f64 && v < height as f64)
                    .then(|| (u.floor() as usize, v.floor() as usize))
            })
            .collect()
    }

    pub fn alive_count(&self) -> usize {
        self.tracks.iter().filter(|t| t.alive).count()
    }
}

/// Follows every point from its frame back to frame 0, one hop at a time.
/// `points[f]` holds continuous positions sampled in frame `f`. A track dies
/// when it leaves the image, samples invalid flow, or straddles a motion
/// boundary.
pub fn backward_track(
    points: &[Vec<(f64, f64)>],
    chain: &FlowChain<'_>,
    width: usize,
    height: usize,
) -> Result<TrackedPointSet, MaskError> {
    for (f, pts) in points.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        if let Some(missing) = (1..=f).find(|&h| !chain.has_hop(h)) {
            return Err(MaskError::MissingFlowHop { frame: missing });
        }
    }
    let inside = |(u, v): (f64, f64)| u >= 0.0 && v >= 0.0 && u < width as f64 && v < height as f64;
    let mut tracks = Vec::new();
    for (f, pts) in points.iter().enumerate() {
        for &start in pts {
            let mut pos = start;
            let mut alive = inside(pos);
            let mut frame = f;
            while alive && frame > 0 {
                match chain.hop(frame, pos)? {
                    Some(next) if inside(next) => pos = next,
                    _ => alive = false,
                }
                frame -= 1;
            }
            tracks.push(Track {
                origin_frame: f,
                start,
                position: pos,
                alive,
            });
        }
    }
    Ok(TrackedPointSet { tracks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain<'a>(fwd: &'a [Option<FlowField>], bwd: &'a [Option<FlowField>]) -> FlowChain<'a> {
        FlowChain {
            forward: fwd,
            backward: bwd,
            max_spread: 1.0,
        }
    }

    #[test]
    fn sampling_edge_cases() {
        let empty = BinaryMask::new(10, 10);
        assert!(sample_dynamic_points(&empty, 5, 1).is_empty());
        let mut one = BinaryMask::new(10, 10);
        one.set(4, 7, true);
        assert_eq!(sample_dynamic_points(&one, 5, 1), vec![(4, 7)]);
        let full = BinaryMask::from_fn(30, 30, |_, _| true);
        let a = sample_dynamic_points(&full, 64, 9);
        assert_eq!(a.len(), 64);
        assert_eq!(a, sample_dynamic_points(&full, 64, 9));
        assert_ne!(a, sample_dynamic_points(&full, 64, 10));
        let mut dedup = a.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 64);
    }

    #[test]
    fn zero_flow_keeps_positions() {
        let fwd: Vec<Option<FlowField>> = (0..4).map(|_| Some(FlowField::zeros(20, 20))).collect();
        let bwd = vec![None; 4];
        let pts = vec![vec![], vec![(3.5, 4.5)], vec![], vec![(10.25, 2.0)]];
        let set = backward_track(&pts, &chain(&fwd, &bwd), 20, 20).unwrap();
        assert_eq!(set.tracks.len(), 2);
        assert!(set.tracks.iter().all(|t| t.alive && t.position == t.start));
    }

    #[test]
    fn three_hop_uniform_chain() {
        // Forward flow (-1, 0) per frame; inverting it moves +1 per hop.
        let fwd: Vec<Option<FlowField>> = (0..4).map(|_| Some(FlowField::uniform(20, 20, -1.0, 0.0))).collect();
        let bwd = vec![None; 4];
        let pts = vec![vec![], vec![], vec![], vec![(10.0, 5.0)]];
        let set = backward_track(&pts, &chain(&fwd, &bwd), 20, 20).unwrap();
        assert_eq!(set.tracks[0].position, (13.0, 5.0));
        assert!(set.tracks[0].alive);
        // Same answer from explicit backward flows.
        let bwd: Vec<Option<FlowField>> = (0..4).map(|_| Some(FlowField::uniform(20, 20, 1.0, 0.0))).collect();
        let fwd = vec![None; 4];
        let set = backward_track(&pts, &chain(&fwd, &bwd), 20, 20).unwrap();
        assert_eq!(set.tracks[0].position, (13.0, 5.0));
    }

    #[test]
    fn off_image_tracks_die() {
        let fwd: Vec<Option<FlowField>> = (0..3).map(|_| Some(FlowField::uniform(20, 20, -8.0, 0.0))).collect();
        let bwd = vec![None; 3];
        let pts = vec![vec![], vec![], vec![(10.0, 5.0)]];
        let set = backward_track(&pts, &chain(&fwd, &bwd), 20, 20).unwrap();
        assert!(!set.tracks[0].alive);
        assert!(set.seeds(20, 20).is_empty());
    }

    #[test]
    fn motion_boundary_kills_track() {
        let mut f = FlowField::zeros(20, 20);
        for y in 0..20 {
            for x in 10..20 {
                f.set(x, y, 5.0, 0.0, true);
            }
        }
        let bwd = vec![None, Some(f)];
        let fwd = vec![None, None];
        let pts = vec![vec![], vec![(10.0, 5.5), (4.5, 5.5)]];
        let set = backward_track(&pts, &chain(&fwd, &bwd), 20, 20).unwrap();
        assert!(!set.tracks[0].alive);
        assert!(set.tracks[1].alive);
    }

    #[test]
    fn missing_hop_is_an_error() {
        let fwd = vec![Some(FlowField::zeros(5, 5)), None, None];
        let bwd = vec![None, None, None];
        let pts = vec![vec![], vec![], vec![(1.0, 1.0)]];
        assert!(matches!(
            backward_track(&pts, &chain(&fwd, &bwd), 5, 5),
            Err(MaskError::MissingFlowHop { frame: 2 })
        ));
    }
}
