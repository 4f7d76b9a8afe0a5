use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Update order for [`ClassicHopfield::update`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Neurons `0..N` in fixed order, each seeing the latest state.
    /// Energy never increases.
    #[default]
    Sequential,
    /// All neurons from the previous state at once. May oscillate.
    Synchronous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub state: Vec<i8>,
    pub converged: bool,
    pub sweeps: usize,
}

/// Binary Hopfield network with Hebbian weights `W = (1/N) Σ m mᵀ`, zero
/// diagonal.
#[derive(Debug, Clone)]
pub struct ClassicHopfield {
    neuron_count: usize,
    weights: DMatrix<f64>,
    stored_patterns: Vec<Vec<i8>>,
}

fn check_binary(pattern: &[i8]) -> Result<()> {
    match pattern.iter().find(|&&s| s != 1 && s != -1) {
        Some(v) => Err(Error::invalid(format!("non-binary entry {v}"))),
        None => Ok(()),
    }
}

impl ClassicHopfield {
    /// Store `patterns` with the Hebbian outer-product rule.
    pub fn store(patterns: &[Vec<i8>]) -> Result<Self> {
        let first = patterns
            .first()
            .ok_or_else(|| Error::invalid("empty pattern list"))?;
        let n = first.len();
        if n == 0 {
            return Err(Error::invalid("patterns must have at least one neuron"));
        }
        let mut weights = DMatrix::<f64>::zeros(n, n);
        for p in patterns {
            if p.len() != n {
                return Err(Error::dim("classic_store", n, p.len()));
            }
            check_binary(p)?;
            for i in 0..n {
                for j in 0..n {
                    weights[(i, j)] += f64::from(p[i] * p[j]);
                }
            }
        }
        weights /= n as f64;
        weights.fill_diagonal(0.0);
        Ok(Self {
            neuron_count: n,
            weights,
            stored_patterns: patterns.to_vec(),
        })
    }

    pub fn neuron_count(&self) -> usize {
        self.neuron_count
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn stored_patterns(&self) -> &[Vec<i8>] {
        &self.stored_patterns
    }

    fn check_state(&self, state: &[i8]) -> Result<()> {
        if state.len() != self.neuron_count {
            return Err(Error::dim("hopfield state", self.neuron_count, state.len()));
        }
        check_binary(state)
    }

    fn local_field(&self, state: &[i8], i: usize) -> f64 {
        self.weights
            .row(i)
            .iter()
            .zip(state)
            .map(|(w, &s)| w * f64::from(s))
            .sum()
    }

    /// `E(s) = -½ sᵀ W s`.
    pub fn energy(&self, state: &[i8]) -> Result<f64> {
        self.check_state(state)?;
        let mut e = 0.0;
        for i in 0..self.neuron_count {
            e += f64::from(state[i]) * self.local_field(state, i);
        }
        Ok(-0.5 * e)
    }

    /// Asynchronous update of neuron `i` in place. Returns whether it flipped.
    /// A zero local field keeps the current sign.
    pub fn step(&self, state: &mut [i8], i: usize) -> Result<bool> {
        self.check_state(state)?;
        if i >= self.neuron_count {
            return Err(Error::invalid(format!("neuron index {i} out of range")));
        }
        let h = self.local_field(state, i);
        let next = if h > 0.0 {
            1
        } else if h < 0.0 {
            -1
        } else {
            state[i]
        };
        let flipped = next != state[i];
        state[i] = next;
        Ok(flipped)
    }

    /// Run up to `max_sweeps` sweeps, stopping at the first sweep that leaves
    /// the state unchanged.
    pub fn update(
        &self,
        state: &[i8],
        schedule: Schedule,
        max_sweeps: usize,
    ) -> Result<UpdateOutcome> {
        self.check_state(state)?;
        let mut current = state.to_vec();
        for sweep in 1..=max_sweeps {
            let changed = match schedule {
                Schedule::Sequential => {
                    let mut changed = false;
                    for i in 0..self.neuron_count {
                        changed |= self.step(&mut current, i)?;
                    }
                    changed
                }
                Schedule::Synchronous => {
                    let next: Vec<i8> = (0..self.neuron_count)
                        .map(|i| {
                            let h = self.local_field(&current, i);
                            if h > 0.0 {
                                1
                            } else if h < 0.0 {
                                -1
                            } else {
                                current[i]
                            }
                        })
                        .collect();
                    let changed = next != current;
                    current = next;
                    changed
                }
            };
            if !changed {
                return Ok(UpdateOutcome {
                    state: current,
                    converged: true,
                    sweeps: sweep,
                });
            }
        }
        Ok(UpdateOutcome {
            state: current,
            converged: false,
            sweeps: max_sweeps,
        })
    }
}
