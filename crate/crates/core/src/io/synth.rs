//! Synthetic datasets: bright disks on a noisy background.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Extent, GrayImage, Location};

use super::dataset::{Dataset, DatasetEntry, Partition};

/// Placement attempts per object before a layout is restarted.
const ATTEMPTS_PER_OBJECT: usize = 2000;
/// Layout restarts before the request is declared infeasible.
const LAYOUT_RESTARTS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub width: usize,
    pub height: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub min_radius: f64,
    pub max_radius: f64,
    /// Mean background intensity.
    pub background: f64,
    /// Intensity added inside an object disk.
    pub contrast: f64,
    /// Standard deviation of the additive Gaussian noise.
    pub noise: f64,
    /// Correlation-kernel radius the separation rule accounts for.
    pub kernel_radius: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            train: 10,
            validation: 5,
            test: 10,
            width: 64,
            height: 64,
            min_objects: 5,
            max_objects: 5,
            min_radius: 2.0,
            max_radius: 3.0,
            background: 90.0,
            contrast: 40.0,
            noise: 25.0,
            kernel_radius: 3.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Minimum center-to-center distance.
    pub fn separation(&self) -> f64 {
        2.0 * (self.max_radius + self.kernel_radius)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.width == 0 || self.height == 0 {
            return bad("image extent must be nonempty".into());
        }
        if self.min_objects > self.max_objects {
            return bad("min_objects exceeds max_objects".into());
        }
        if !(self.min_radius > 0.0 && self.min_radius <= self.max_radius && self.max_radius.is_finite()) {
            return bad("object radii must satisfy 0 < min_radius <= max_radius".into());
        }
        if !(self.noise >= 0.0 && self.kernel_radius >= 0.0) {
            return bad("noise and kernel radius must be non-negative".into());
        }
        Ok(())
    }
}

/// One synthetic image with its object centers and radii.
fn render(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<(GrayImage, Vec<Location>)> {
    let extent = Extent::new(config.width, config.height);
    let count = rng.gen_range(config.min_objects..=config.max_objects);
    let margin = config.max_radius.ceil() as usize;
    if count > 0 && (2 * margin >= config.width || 2 * margin >= config.height) {
        return Err(Error::InfeasibleLayout {
            requested: count,
            separation: config.separation(),
            extent,
        });
    }
    let sep2 = config.separation().powi(2);
    let mut centers: Vec<Location> = Vec::new();
    'layout: for _ in 0..LAYOUT_RESTARTS {
        centers.clear();
        for _ in 0..count {
            let placed = (0..ATTEMPTS_PER_OBJECT).find_map(|_| {
                let c = Location::new(
                    rng.gen_range(margin..config.width - margin) as u32,
                    rng.gen_range(margin..config.height - margin) as u32,
                );
                centers.iter().all(|o| o.distance_sq(c) >= sep2).then_some(c)
            });
            match placed {
                Some(c) => centers.push(c),
                None => continue 'layout,
            }
        }
        break;
    }
    if centers.len() < count {
        return Err(Error::InfeasibleLayout {
            requested: count,
            separation: config.separation(),
            extent,
        });
    }
    let radii: Vec<f64> = centers
        .iter()
        .map(|_| rng.gen_range(config.min_radius..=config.max_radius))
        .collect();
    let noise = Normal::new(0.0, config.noise).expect("noise is finite and non-negative");
    let mut data = Vec::with_capacity(extent.len());
    for y in 0..config.height {
        for x in 0..config.width {
            let mut v = config.background + noise.sample(rng);
            for (c, &r) in centers.iter().zip(&radii) {
                let d = c.distance(Location::new(x as u32, y as u32));
                // Anti-aliased edge one pixel wide.
                v += config.contrast * (r + 0.5 - d).clamp(0.0, 1.0);
            }
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    centers.sort_by_key(|c| c.row_major_key());
    Ok((GrayImage::new(extent, data)?, centers))
}

/// Generates the train, validation and test partitions. Image `i` of the
/// whole set draws from its own RNG stream of `seed`.
pub fn synth(config: &SynthConfig) -> Result<Dataset> {
    config.check()?;
    let mut entries = Vec::new();
    let mut stream = 0u64;
    for (partition, n) in [
        (Partition::Train, config.train),
        (Partition::Validation, config.validation),
        (Partition::Test, config.test),
    ] {
        for i in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(stream);
            stream += 1;
            let (image, objects) = render(config, &mut rng)?;
            entries.push(DatasetEntry {
                id: format!("{partition}_{i:03}"),
                image,
                objects,
                partition,
            });
        }
    }
    Ok(Dataset { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            train: 2,
            validation: 1,
            test: 1,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn zero_objects_give_empty_labels() {
        let ds = synth(&SynthConfig {
            min_objects: 0,
            max_objects: 0,
            ..small(1)
        })
        .unwrap();
        assert!(ds.entries.iter().all(|e| e.objects.is_empty()));
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(synth(&small(4)).unwrap(), synth(&small(4)).unwrap());
        assert_ne!(synth(&small(4)).unwrap(), synth(&small(5)).unwrap());
    }

    #[test]
    fn separation_holds_for_many_seeds() {
        for seed in 0..100 {
            let cfg = SynthConfig {
                train: 1,
                validation: 0,
                test: 0,
                min_objects: 3,
                max_objects: 6,
                seed,
                ..SynthConfig::default()
            };
            let sep = cfg.separation();
            for e in synth(&cfg).unwrap().entries {
                for (i, a) in e.objects.iter().enumerate() {
                    for b in &e.objects[i + 1..] {
                        assert!(a.distance(*b) >= sep);
                    }
                }
            }
        }
    }

    #[test]
    fn infeasible_request_is_an_error() {
        let cfg = SynthConfig {
            width: 20,
            height: 20,
            min_objects: 10,
            max_objects: 10,
            ..small(0)
        };
        assert!(matches!(synth(&cfg), Err(Error::InfeasibleLayout { .. })));
    }

    #[test]
    fn objects_are_brighter_than_background() {
        let ds = synth(&SynthConfig { noise: 0.0, ..small(2) }).unwrap();
        let e = &ds.entries[0];
        for o in &e.objects {
            assert_eq!(e.image.get(o.x as usize, o.y as usize), 130);
        }
        assert_eq!(e.image.get(0, 0), 90);
    }
}
