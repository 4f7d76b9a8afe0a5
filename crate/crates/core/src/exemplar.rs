use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A labeled `(x, y)` pair that can be placed in a context.
///
/// `latent_id` records the generating prototype for evaluation; oracles must
/// not read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub id: u64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_id: Option<usize>,
}

impl Exemplar {
    pub fn new(id: u64, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            id,
            x,
            y,
            latent_id: None,
        }
    }
}

/// Ordered, non-empty training pool with unique ids and consistent shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarPool {
    exemplars: Vec<Exemplar>,
}

impl ExemplarPool {
    pub fn new(exemplars: Vec<Exemplar>) -> Result<Self> {
        let first = exemplars
            .first()
            .ok_or_else(|| Error::invalid("exemplar pool is empty"))?;
        let (dx, dy) = (first.x.len(), first.y.len());
        let mut seen = HashSet::with_capacity(exemplars.len());
        for e in &exemplars {
            if !seen.insert(e.id) {
                return Err(Error::invalid(format!("duplicate exemplar id {}", e.id)));
            }
            if e.x.len() != dx {
                return Err(Error::dim("exemplar x", dx, e.x.len()));
            }
            if e.y.len() != dy {
                return Err(Error::dim("exemplar y", dy, e.y.len()));
            }
        }
        Ok(Self { exemplars })
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    pub fn exemplars(&self) -> &[Exemplar] {
        &self.exemplars
    }

    pub fn get(&self, index: usize) -> Option<&Exemplar> {
        self.exemplars.get(index)
    }

    pub fn position(&self, id: u64) -> Option<usize> {
        self.exemplars.iter().position(|e| e.id == id)
    }

    pub fn by_id(&self, id: u64) -> Option<&Exemplar> {
        self.exemplars.iter().find(|e| e.id == id)
    }

    pub fn x_dim(&self) -> usize {
        self.exemplars[0].x.len()
    }

    pub fn y_dim(&self) -> usize {
        self.exemplars[0].y.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Exemplar> {
        self.exemplars.iter()
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.exemplars {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut out = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line)?);
        }
        Self::new(out)
    }
}

impl<'a> IntoIterator for &'a ExemplarPool {
    type Item = &'a Exemplar;
    type IntoIter = std::slice::Iter<'a, Exemplar>;

    fn into_iter(self) -> Self::IntoIter {
        self.exemplars.iter()
    }
}
