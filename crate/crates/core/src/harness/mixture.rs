use std::fmt;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grad::reference_diagram;
use crate::persistence::{vr_persistence, PersistenceDiagram};
use crate::pointcloud::{pairwise_distances, PointCloud};
use crate::rng::substream;
use crate::stats::spearman;
use crate::tcloss::{tc_loss, TcMethod, TcParams};

/// Spearman correlation at or beyond which a curve counts as monotone.
pub const TREND_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Trend {
    Up,
    Down,
    NonMonotone,
}

impl Trend {
    pub fn classify(rho: Option<f64>) -> Self {
        match rho {
            Some(r) if r >= TREND_THRESHOLD => Trend::Up,
            Some(r) if r <= -TREND_THRESHOLD => Trend::Down,
            _ => Trend::NonMonotone,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Trend::Up => "↑",
            Trend::Down => "↓",
            Trend::NonMonotone => "−",
        }
    }
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trend::Up => "up",
            Trend::Down => "down",
            Trend::NonMonotone => "nonmonotone",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureCurve {
    pub ratios: Vec<f64>,
    /// Raw loss per ratio, averaged over seeds.
    pub raw_loss: Vec<f64>,
    /// Loss divided by the all-clean value, averaged over seeds.
    pub normalized_loss: Vec<f64>,
    pub method: TcMethod,
    pub spearman: Option<f64>,
    pub trend: Trend,
}

impl MixtureCurve {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["ratio", "raw_loss", "normalized_loss"])?;
        for k in 0..self.ratios.len() {
            w.write_record([
                self.ratios[k].to_string(),
                self.raw_loss[k].to_string(),
                self.normalized_loss[k].to_string(),
            ])?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .map_err(|e| Error::Parse(e.to_string()))
    }
}

fn loss_of(cloud: &PointCloud, reference: &PersistenceDiagram, params: &TcParams) -> Result<f64> {
    let diagram = vr_persistence(&pairwise_distances(cloud), params.max_dim)?;
    tc_loss(&diagram, reference, params)
}

/// Loss of clean/adversarial mixtures against the text cloud as the share of
/// adversarial rows grows from 0 to 1 in `steps` equal increments.
///
/// Row `i` of `clean` and row `i` of `adv` are counterparts. For each seed a
/// random replacement order is drawn from stream `(seed, 0)`; at ratio
/// `k / (steps - 1)` the first `floor(k * N / (steps - 1))` rows in that order
/// are swapped for their adversarial counterparts.
pub fn mixture_curve(
    clean: &PointCloud,
    adv: &PointCloud,
    text: &PointCloud,
    steps: usize,
    params: &TcParams,
    seeds: &[u64],
) -> Result<MixtureCurve> {
    if clean.len() != adv.len() {
        return Err(Error::Pairing {
            clean: clean.len(),
            adversarial: adv.len(),
        });
    }
    if clean.dim() != adv.dim() {
        return Err(Error::InvalidInput(format!(
            "clean rows have dimension {}, adversarial rows {}",
            clean.dim(),
            adv.dim()
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 mixture steps, got {steps}")));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidInput("need at least one seed".into()));
    }
    let reference = reference_diagram(text, params)?;
    let base = loss_of(clean, &reference, params)?;
    if base == 0.0 {
        return Err(Error::Normalization);
    }

    let n = clean.len();
    let d = clean.dim();
    let jobs: Vec<(usize, usize)> = (0..seeds.len())
        .flat_map(|s| (1..steps).map(move |k| (s, k)))
        .collect();
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(s, k)| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut substream(seeds[s], 0));
            let count = k * n / (steps - 1);
            let mut data = clean.as_slice().to_vec();
            for &r in &order[..count] {
                data[r * d..(r + 1) * d].copy_from_slice(adv.row(r));
            }
            loss_of(&PointCloud::new(n, d, data)?, &reference, params)
        })
        .collect::<Result<_>>()?;

    let s_count = seeds.len() as f64;
    let mut raw_loss = vec![base];
    let mut normalized_loss = vec![1.0];
    for k in 1..steps {
        let mut raw = 0.0;
        let mut norm = 0.0;
        for s in 0..seeds.len() {
            let v = values[s * (steps - 1) + (k - 1)];
            raw += v;
            norm += v / base;
        }
        raw_loss.push(raw / s_count);
        normalized_loss.push(norm / s_count);
    }
    let ratios: Vec<f64> = (0..steps).map(|k| k as f64 / (steps - 1) as f64).collect();
    let rho = spearman(&ratios, &normalized_loss);
    Ok(MixtureCurve {
        ratios,
        raw_loss,
        normalized_loss,
        method: params.method,
        spearman: rho,
        trend: Trend::classify(rho),
    })
}
