//! Where layer parameters come from when a network is built.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::io::weights::WeightStore;

/// How a freshly initialised tensor is filled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Normal with standard deviation `sqrt(2 / fan_in)`.
    He { fan_in: usize },
    Zeros,
    Ones,
}

pub trait ParamSource {
    fn fetch(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Vec<f32>>;

    /// Called once after every tensor has been fetched.
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// 64-bit FNV-1a, used to derive a per-tensor stream from a seed.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seeded random initialisation.
///
/// Every tensor draws from its own generator keyed by `(seed, name)`, so a
/// layer's values do not depend on which other layers exist.
#[derive(Debug, Clone)]
pub struct RandomInit {
    pub seed: u64,
}

impl RandomInit {
    pub fn new(seed: u64) -> Self {
        RandomInit { seed }
    }
}

impl ParamSource for RandomInit {
    fn fetch(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Vec<f32>> {
        let n = numel(shape);
        Ok(match init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::He { fan_in } => {
                let std = (2.0 / fan_in.max(1) as f32).sqrt();
                let normal = Normal::new(0.0f32, std).expect("finite std");
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(name.as_bytes()));
                (0..n).map(|_| normal.sample(&mut rng)).collect()
            }
        })
    }
}

/// All convolution weights zero; batch norm left at identity.
#[derive(Debug, Clone, Default)]
pub struct ZeroInit;

impl ParamSource for ZeroInit {
    fn fetch(&mut self, _name: &str, shape: &[usize], init: Init) -> Result<Vec<f32>> {
        let fill = if init == Init::Ones { 1.0 } else { 0.0 };
        Ok(vec![fill; numel(shape)])
    }
}

/// Reads tensors from a [`WeightStore`], rejecting missing, mis-shaped and
/// unused entries.
pub struct StoreSource<'a> {
    store: &'a WeightStore,
    used: BTreeSet<String>,
}

impl<'a> StoreSource<'a> {
    pub fn new(store: &'a WeightStore) -> Self {
        StoreSource {
            store,
            used: BTreeSet::new(),
        }
    }
}

impl ParamSource for StoreSource<'_> {
    fn fetch(&mut self, name: &str, shape: &[usize], _init: Init) -> Result<Vec<f32>> {
        let entry = self
            .store
            .entry(name)
            .ok_or_else(|| Error::MissingWeight(name.to_string()))?;
        if entry.shape != shape {
            return Err(Error::WeightShape {
                layer: name.to_string(),
                expected: shape.to_vec(),
                found: entry.shape.clone(),
            });
        }
        self.used.insert(name.to_string());
        Ok(self.store.values(name).expect("entry exists"))
    }

    fn finish(&mut self) -> Result<()> {
        match self.store.names().find(|n| !self.used.contains(*n)) {
            Some(unknown) => Err(Error::UnknownLayer(unknown.to_string())),
            None => Ok(()),
        }
    }
}
