//! Synthetic trajectory corpora with planted regime schedules.
//!
//! Regions sit on a grid whose spacing is derived from the slowest
//! configured speed, so every trip departs and arrives inside the day and
//! all trip endpoints cluster tightly around their region anchor. Grouping
//! the generated points with the recommended radius therefore recovers
//! exactly one cell per visited region, and the planted slice-by-slice flow
//! patterns show up verbatim in the snapshot series.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{Crs, Point2};
use crate::ingest::{Dataset, Trajectory, TrajectoryPoint};

/// A flow structure active during a regime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FlowPattern {
    /// Many-to-one: the first `spokes` non-hub regions each send trips to
    /// the hub.
    StarIn { hub: usize, spokes: usize },
    /// One-to-many: the hub sends trips to the first `spokes` non-hub
    /// regions.
    StarOut { hub: usize, spokes: usize },
    /// A few random ordered pairs, redrawn per slice.
    Sparse { pairs: usize },
}

impl FlowPattern {
    fn pairs(&self, regions: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
        match *self {
            FlowPattern::StarIn { hub, spokes } => (0..regions)
                .filter(|&r| r != hub)
                .take(spokes)
                .map(|r| (r, hub))
                .collect(),
            FlowPattern::StarOut { hub, spokes } => (0..regions)
                .filter(|&r| r != hub)
                .take(spokes)
                .map(|r| (hub, r))
                .collect(),
            FlowPattern::Sparse { pairs } => {
                let mut out = Vec::with_capacity(pairs);
                let mut guard = 0;
                while out.len() < pairs && guard < pairs * 20 + 20 {
                    guard += 1;
                    let i = rng.random_range(0..regions);
                    let j = rng.random_range(0..regions);
                    if i != j && !out.contains(&(i, j)) {
                        out.push((i, j));
                    }
                }
                out
            }
        }
    }

    fn validate(&self, regions: usize) -> Result<()> {
        let check_star = |hub: usize, spokes: usize| {
            if hub >= regions {
                return Err(Error::Config(format!("hub {hub} out of range")));
            }
            if spokes == 0 || spokes > regions - 1 {
                return Err(Error::Config(format!(
                    "spoke count {spokes} must be in 1..={}",
                    regions - 1
                )));
            }
            Ok(())
        };
        match *self {
            FlowPattern::StarIn { hub, spokes } | FlowPattern::StarOut { hub, spokes } => {
                check_star(hub, spokes)
            }
            FlowPattern::Sparse { pairs } => {
                if pairs > regions * (regions - 1) {
                    return Err(Error::Config(format!("{pairs} sparse pairs do not fit")));
                }
                Ok(())
            }
        }
    }
}

/// A run of slices sharing flow patterns and a travel speed. An empty
/// pattern list is a quiet period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub first_slice: usize,
    pub last_slice: usize,
    pub patterns: Vec<FlowPattern>,
    pub speed_kmh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub regions: usize,
    pub t_count: usize,
    pub delta_t_s: f64,
    /// Trips generated per active pair per slice.
    pub trips_per_pair: usize,
    /// Extra random trips per slice: round(noise_rate * regions).
    pub noise_rate: f64,
    pub noise_speed_kmh: f64,
    pub seed: u64,
    pub regimes: Vec<Regime>,
}

impl SynthConfig {
    /// Five slices of many-to-one flow into region 0, then five slices of
    /// one-to-many flow out of it.
    pub fn star_flip(regions: usize, seed: u64) -> Self {
        let half_last = 4;
        SynthConfig {
            regions,
            t_count: 10,
            delta_t_s: 3600.0,
            trips_per_pair: 2,
            noise_rate: 0.0,
            noise_speed_kmh: 40.0,
            seed,
            regimes: vec![
                Regime {
                    first_slice: 0,
                    last_slice: half_last,
                    patterns: vec![FlowPattern::StarIn { hub: 0, spokes: regions - 1 }],
                    speed_kmh: 15.0,
                },
                Regime {
                    first_slice: half_last + 1,
                    last_slice: 9,
                    patterns: vec![FlowPattern::StarOut { hub: 0, spokes: regions - 1 }],
                    speed_kmh: 15.0,
                },
            ],
        }
    }

    /// A 19-slice day bracketed by quiet slices: a slow two-hub inbound
    /// morning, a fast sparse midday (invisible under a low-speed rule), and
    /// a slow single-hub outbound evening.
    pub fn three_regime(regions: usize, noise_rate: f64, seed: u64) -> Self {
        SynthConfig {
            regions,
            t_count: 19,
            delta_t_s: 3600.0,
            trips_per_pair: 2,
            noise_rate,
            noise_speed_kmh: 40.0,
            seed,
            regimes: vec![
                Regime {
                    first_slice: 0,
                    last_slice: 0,
                    patterns: vec![],
                    speed_kmh: 15.0,
                },
                Regime {
                    first_slice: 1,
                    last_slice: 6,
                    patterns: vec![
                        FlowPattern::StarIn { hub: 0, spokes: regions - 1 },
                        FlowPattern::StarIn { hub: 1, spokes: regions / 2 },
                    ],
                    speed_kmh: 12.0,
                },
                Regime {
                    first_slice: 7,
                    last_slice: 12,
                    patterns: vec![FlowPattern::Sparse { pairs: 3 }],
                    speed_kmh: 40.0,
                },
                Regime {
                    first_slice: 13,
                    last_slice: 17,
                    patterns: vec![FlowPattern::StarOut { hub: 0, spokes: (regions * 3) / 5 }],
                    speed_kmh: 15.0,
                },
                Regime {
                    first_slice: 18,
                    last_slice: 18,
                    patterns: vec![],
                    speed_kmh: 15.0,
                },
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.regions < 2 {
            return Err(Error::Config("need at least 2 regions".into()));
        }
        if self.t_count == 0 {
            return Err(Error::Config("need at least 1 slice".into()));
        }
        if !(self.delta_t_s > 0.0) {
            return Err(Error::Config("slice width must be positive".into()));
        }
        if self.trips_per_pair == 0 {
            return Err(Error::Config("need at least 1 trip per pair".into()));
        }
        if self.noise_rate < 0.0 || !self.noise_rate.is_finite() {
            return Err(Error::Config("noise rate must be finite and non-negative".into()));
        }
        if !(self.noise_speed_kmh > 0.0) {
            return Err(Error::Config("noise speed must be positive".into()));
        }
        if self.regimes.is_empty() {
            return Err(Error::Config("need at least one regime".into()));
        }
        let mut expected = 0usize;
        for regime in &self.regimes {
            if regime.first_slice != expected {
                return Err(Error::Config("regimes must tile the slice axis".into()));
            }
            if regime.last_slice < regime.first_slice || regime.last_slice >= self.t_count {
                return Err(Error::Config("regime slice range out of bounds".into()));
            }
            if !(regime.speed_kmh > 0.0) {
                return Err(Error::Config("regime speed must be positive".into()));
            }
            for pattern in &regime.patterns {
                pattern.validate(self.regions)?;
            }
            expected = regime.last_slice + 1;
        }
        if expected != self.t_count {
            return Err(Error::Config("regimes must cover every slice".into()));
        }
        Ok(())
    }

    /// Slice indices where a new regime starts; the planted ground truth
    /// for change-point recovery.
    pub fn planted_change_points(&self) -> Vec<usize> {
        self.regimes.iter().skip(1).map(|r| r.first_slice).collect()
    }
}

/// Everything a downstream pipeline needs to reproduce the planted setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthMeta {
    pub regions: usize,
    pub t_count: usize,
    pub delta_t_s: f64,
    pub day_start: f64,
    pub day_end: f64,
    /// Grouping radius that recovers one cell per region anchor.
    pub gamma_m: f64,
    pub anchor_spacing_m: f64,
    pub min_trip_length_m: f64,
    pub planted_change_points: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub meta: SynthMeta,
}

/// Generates the dataset; byte-identical output for identical config.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;

    let side = (cfg.regions as f64).sqrt().ceil() as usize;
    let span = side.saturating_sub(1).max(1);
    let mut v_min_kmh = cfg.noise_speed_kmh;
    for regime in &cfg.regimes {
        if !regime.patterns.is_empty() {
            v_min_kmh = v_min_kmh.min(regime.speed_kmh);
        }
    }
    let v_min_ms = v_min_kmh / 3.6;
    // Longest trip (the grid diagonal) takes at most 0.4 of a slice at the
    // slowest speed; departures stay within the first 0.35 of a slice, so
    // every arrival lands inside the day.
    let spacing = 0.4 * cfg.delta_t_s * v_min_ms / (std::f64::consts::SQRT_2 * span as f64);
    let gamma_m = spacing / 3.0;
    let jitter = spacing * 0.004;

    let anchor = |region: usize| -> Point2 {
        Point2::new(
            (region % side) as f64 * spacing,
            (region / side) as f64 * spacing,
        )
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trajectories = Vec::new();
    let mut serial = 0usize;

    for t in 0..cfg.t_count {
        let regime = cfg
            .regimes
            .iter()
            .find(|r| r.first_slice <= t && t <= r.last_slice)
            .expect("validated regimes tile the axis");
        let slice_start = t as f64 * cfg.delta_t_s;

        let emit = |i: usize, j: usize, speed_kmh: f64, rng: &mut ChaCha8Rng,
                        trajectories: &mut Vec<Trajectory>, serial: &mut usize| {
            let a = anchor(i);
            let b = anchor(j);
            let p0 = Point2::new(
                a.x + rng.random_range(-jitter..=jitter),
                a.y + rng.random_range(-jitter..=jitter),
            );
            let depart = slice_start + rng.random_range(0.0..cfg.delta_t_s * 0.35);
            let p1 = Point2::new(
                b.x + rng.random_range(-jitter..=jitter),
                b.y + rng.random_range(-jitter..=jitter),
            );
            let dist = Crs::PlanarMeters.distance_m(p0, p1);
            let arrive = depart + dist / (speed_kmh / 3.6);
            trajectories.push(Trajectory {
                id: format!("s{t:03}-{:05}", *serial),
                points: vec![
                    TrajectoryPoint { x: p0.x, y: p0.y, t: depart },
                    TrajectoryPoint { x: p1.x, y: p1.y, t: arrive },
                ],
            });
            *serial += 1;
        };

        for pattern in &regime.patterns {
            for (i, j) in pattern.pairs(cfg.regions, &mut rng) {
                for _ in 0..cfg.trips_per_pair {
                    emit(i, j, regime.speed_kmh, &mut rng, &mut trajectories, &mut serial);
                }
            }
        }

        let noise_trips = (cfg.noise_rate * cfg.regions as f64).round() as usize;
        for _ in 0..noise_trips {
            let i = rng.random_range(0..cfg.regions);
            let mut j = rng.random_range(0..cfg.regions);
            if j == i {
                j = (j + 1) % cfg.regions;
            }
            emit(i, j, cfg.noise_speed_kmh, &mut rng, &mut trajectories, &mut serial);
        }
    }

    let day_end = cfg.t_count as f64 * cfg.delta_t_s;
    let dataset = Dataset {
        trajectories,
        crs: Crs::PlanarMeters,
        day_start: 0.0,
        day_end,
    };
    dataset.validate()?;

    Ok(SynthOutput {
        dataset,
        meta: SynthMeta {
            regions: cfg.regions,
            t_count: cfg.t_count,
            delta_t_s: cfg.delta_t_s,
            day_start: 0.0,
            day_end,
            gamma_m,
            anchor_spacing_m: spacing,
            min_trip_length_m: 0.0,
            planted_change_points: cfg.planted_change_points(),
            seed: cfg.seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowgraph::build_series;
    use crate::ingest::build_slice_axis;
    use crate::partition::{collect_seed_points, group_seed_points, SeedMode};
    use crate::rules::Method;

    #[test]
    fn identical_seed_identical_bytes() {
        let cfg = SynthConfig::star_flip(6, 42);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        crate::ingest::write_dataset_jsonl(&a.dataset, &mut buf_a).unwrap();
        crate::ingest::write_dataset_jsonl(&b.dataset, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn different_seed_different_data() {
        let a = generate(&SynthConfig::star_flip(6, 1)).unwrap();
        let b = generate(&SynthConfig::star_flip(6, 2)).unwrap();
        assert_ne!(a.dataset, b.dataset);
    }

    #[test]
    fn grouping_recovers_one_cell_per_region() {
        let out = generate(&SynthConfig::star_flip(6, 7)).unwrap();
        let seeds = collect_seed_points(&out.dataset, SeedMode::AllPoints);
        let (cells, _) =
            group_seed_points(&seeds, out.meta.gamma_m, out.dataset.crs).unwrap();
        assert_eq!(cells.len(), 6);
    }

    #[test]
    fn star_in_concentrates_in_degree_on_hub() {
        let out = generate(&SynthConfig::star_flip(6, 3)).unwrap();
        let seeds = collect_seed_points(&out.dataset, SeedMode::AllPoints);
        let (cells, _) =
            group_seed_points(&seeds, out.meta.gamma_m, out.dataset.crs).unwrap();
        let axis = build_slice_axis(&out.dataset, out.meta.delta_t_s).unwrap();
        assert_eq!(axis.t_count, 10);
        let series = build_series(&out.dataset, &cells, &axis, Method::All, None).unwrap();

        // First-half snapshots: all edges point into one vertex.
        let snap = &series.snapshots[2];
        assert_eq!(snap.edges.len(), 5);
        let mut in_degree = vec![0usize; cells.len()];
        for &(_, j) in &snap.edges {
            in_degree[j] += 1;
        }
        assert_eq!(*in_degree.iter().max().unwrap(), 5);

        // Second half: flipped.
        let snap = &series.snapshots[7];
        let mut out_degree = vec![0usize; cells.len()];
        for &(i, _) in &snap.edges {
            out_degree[i] += 1;
        }
        assert_eq!(*out_degree.iter().max().unwrap(), 5);
    }

    #[test]
    fn zero_noise_matches_planted_pattern_exactly() {
        let mut cfg = SynthConfig::star_flip(5, 11);
        cfg.noise_rate = 0.0;
        let out = generate(&cfg).unwrap();
        let seeds = collect_seed_points(&out.dataset, SeedMode::AllPoints);
        let (cells, _) =
            group_seed_points(&seeds, out.meta.gamma_m, out.dataset.crs).unwrap();
        let axis = build_slice_axis(&out.dataset, out.meta.delta_t_s).unwrap();
        let series = build_series(&out.dataset, &cells, &axis, Method::All, None).unwrap();
        for snap in &series.snapshots[0..5] {
            assert_eq!(snap.edges.len(), 4);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = SynthConfig::star_flip(6, 0);
        cfg.regimes[1].first_slice = 6;
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));

        let mut cfg = SynthConfig::star_flip(6, 0);
        cfg.trips_per_pair = 0;
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));

        let cfg = SynthConfig::star_flip(1, 0);
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn planted_change_points_are_regime_starts() {
        let cfg = SynthConfig::three_regime(25, 0.1, 5);
        assert_eq!(cfg.planted_change_points(), vec![1, 7, 13, 18]);
    }
}
