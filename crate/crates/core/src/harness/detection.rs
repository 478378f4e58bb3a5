use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, StudyMode, StudySettings};
use crate::error::{Error, Result};
use crate::grad::{batch_features_with_reference, reference_diagram};
use crate::io::read_cloud;
use crate::mmdtest::{optimize_kernel, permutation_test, KernelMethod, KernelParams, SampleSet, TestOutcome};
use crate::persistence::PersistenceDiagram;
use crate::pointcloud::PointCloud;
use crate::rng::{child_seed, substream};
use crate::tcloss::{TcMethod, TcParams};

/// In-memory inputs of a detection study.
#[derive(Debug, Clone)]
pub struct DetectionData {
    pub clean: PointCloud,
    pub adversarial: Option<PointCloud>,
    pub text: PointCloud,
    pub holdout: Option<PointCloud>,
}

impl DetectionData {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let read = |p: &std::path::Path| read_cloud(p, cfg.l2_normalize);
        Ok(Self {
            clean: read(&cfg.clean)?,
            adversarial: cfg.adversarial.as_deref().map(read).transpose()?,
            text: read(&cfg.text)?,
            holdout: cfg.holdout.as_deref().map(read).transpose()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub outcome: TestOutcome,
    /// Rows of the clean file in the clean batch.
    pub clean_rows: Vec<usize>,
    /// Rows of the adversarial file (power) or the clean file (Type-I).
    pub test_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub mode: StudyMode,
    pub kernel: KernelMethod,
    pub seed: u64,
    pub kernel_params: KernelParams,
    /// Clean-file rows used as hold-out; empty when a separate file was given.
    pub holdout_rows: Vec<usize>,
    pub calibration_clean_rows: Vec<usize>,
    /// Calibration rows of the test side, indexed like `TrialRecord::test_rows`.
    pub calibration_test_rows: Vec<usize>,
    pub trials: Vec<TrialRecord>,
    pub rejection_rate: f64,
}

impl DetectionReport {
    /// `trial,seed,statistic,threshold,p_value,reject`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["trial", "seed", "statistic", "threshold", "p_value", "reject"])?;
        for t in &self.trials {
            w.write_record([
                t.trial.to_string(),
                t.seed.to_string(),
                t.outcome.statistic.to_string(),
                t.outcome.threshold.to_string(),
                t.outcome.p_value.to_string(),
                t.outcome.reject.to_string(),
            ])?;
        }
        into_string(w)
    }

    /// `trial,role,rows` with `;`-joined row indices; fixed splits use trial `-1`.
    pub fn index_log_csv(&self) -> Result<String> {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["trial", "role", "rows"])?;
        w.write_record(["-1", "holdout", &join(&self.holdout_rows)])?;
        w.write_record(["-1", "calibration_clean", &join(&self.calibration_clean_rows)])?;
        w.write_record(["-1", "calibration_test", &join(&self.calibration_test_rows)])?;
        for t in &self.trials {
            let trial = t.trial.to_string();
            w.write_record([trial.as_str(), "clean_batch", &join(&t.clean_rows)])?;
            w.write_record([trial.as_str(), "test_batch", &join(&t.test_rows)])?;
        }
        into_string(w)
    }

    /// Whether, in every trial, the clean batch, test batch, hold-out and
    /// calibration rows are pairwise disjoint. Sets indexing different files
    /// are disjoint by construction.
    pub fn splits_are_disjoint(&self) -> bool {
        self.trials.iter().all(|t| {
            let mut clean_sets = vec![&self.holdout_rows, &self.calibration_clean_rows, &t.clean_rows];
            let mut test_sets = vec![&self.calibration_test_rows, &t.test_rows];
            if self.mode == StudyMode::Type1 {
                clean_sets.append(&mut test_sets);
                test_sets = Vec::new();
            }
            pairwise_disjoint(&clean_sets) && pairwise_disjoint(&test_sets)
        })
    }
}

fn pairwise_disjoint(sets: &[&Vec<usize>]) -> bool {
    let mut seen = std::collections::HashSet::new();
    sets.iter().all(|s| s.iter().all(|&r| seen.insert(r)))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
        .map_err(|e| Error::Parse(e.to_string()))
}

/// Loss settings a kernel needs features for; the kernel picks the method.
fn feature_params(settings: &StudySettings) -> Option<TcParams> {
    let method = match settings.kernel {
        KernelMethod::Tpsammd => TcMethod::Tp,
        KernelMethod::Mksammd => TcMethod::Mk,
        KernelMethod::SammdEmb | KernelMethod::Gaussian => return None,
    };
    Some(TcParams {
        method,
        ..settings.tc
    })
}

struct Featurizer<'a> {
    holdout: &'a PointCloud,
    reference: Option<(PersistenceDiagram, TcParams)>,
}

impl Featurizer<'_> {
    fn sample_set(&self, batch: PointCloud) -> Result<SampleSet> {
        let aux = match &self.reference {
            Some((diagram, params)) => {
                Some(batch_features_with_reference(&batch, self.holdout, diagram, params)?.grads)
            }
            None => None,
        };
        SampleSet::new(batch, aux)
    }
}

fn take(pool: &[usize], count: usize, what: &str) -> Result<Vec<usize>> {
    if pool.len() < count {
        return Err(Error::InvalidInput(format!(
            "insufficient rows: {what} needs {count}, {} left",
            pool.len()
        )));
    }
    Ok(pool[..count].to_vec())
}

fn shuffled(n: usize, seed: u64, unit: u64) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(&mut substream(seed, unit));
    v
}

/// Runs the detection study on in-memory data.
///
/// The clean rows are shuffled once with stream `(seed, 0)` and split into
/// hold-out, calibration and the trial pool; the adversarial rows likewise
/// with stream `(seed, 1)`. The kernel is optimized once on the calibration
/// split. Trial `t` draws its batches from its own seed, which depends on
/// `seed` and `t` only, so studies with different kernels see the same draws.
pub fn run_detection(data: &DetectionData, settings: &StudySettings) -> Result<DetectionReport> {
    let s = settings;
    if s.batch_size < 2 || s.calibration_size < 2 {
        return Err(Error::InvalidInput("batch and calibration sizes must be at least 2".into()));
    }
    if s.trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    let adversarial = match (s.mode, &data.adversarial) {
        (StudyMode::Power, None) => {
            return Err(Error::InvalidInput("power mode needs adversarial rows".into()))
        }
        (StudyMode::Power, Some(a)) => Some(a),
        (StudyMode::Type1, _) => None,
    };

    let order = shuffled(data.clean.len(), s.seed, 0);
    let mut cursor = 0;
    let mut next = |count: usize, what: &str| -> Result<Vec<usize>> {
        let rows = take(&order[cursor..], count, what)?;
        cursor += count;
        Ok(rows)
    };
    let (holdout, holdout_rows) = match &data.holdout {
        Some(h) => {
            let rows = take(&(0..h.len()).collect::<Vec<_>>(), s.holdout_size, "hold-out")?;
            (h.select(&rows)?, Vec::new())
        }
        None => {
            let rows = next(s.holdout_size, "hold-out")?;
            (data.clean.select(&rows)?, rows)
        }
    };
    let calibration_clean_rows = next(s.calibration_size, "clean calibration")?;
    let (calibration_test_rows, test_pool) = match adversarial {
        Some(a) => {
            let adv_order = shuffled(a.len(), s.seed, 1);
            let cal = take(&adv_order, s.calibration_size, "adversarial calibration")?;
            (cal, adv_order[s.calibration_size..].to_vec())
        }
        None => (next(s.calibration_size, "clean calibration")?, Vec::new()),
    };
    let clean_pool = order[cursor..].to_vec();
    let per_trial_clean = match s.mode {
        StudyMode::Power => s.batch_size,
        StudyMode::Type1 => 2 * s.batch_size,
    };
    take(&clean_pool, per_trial_clean, "per-trial clean batches")?;
    if adversarial.is_some() {
        take(&test_pool, s.batch_size, "per-trial adversarial batches")?;
    }
    let test_cloud = adversarial.unwrap_or(&data.clean);

    let tc = feature_params(s);
    let featurizer = Featurizer {
        holdout: &holdout,
        reference: match tc {
            Some(p) => Some((reference_diagram(&data.text, &p)?, p)),
            None => None,
        },
    };

    let cal_x = featurizer.sample_set(data.clean.select(&calibration_clean_rows)?)?;
    let cal_y = featurizer.sample_set(test_cloud.select(&calibration_test_rows)?)?;
    let pooled_emb = cal_x.emb().concat(cal_y.emb())?;
    let pooled_aux = match (cal_x.aux(), cal_y.aux()) {
        (Some(a), Some(b)) => Some(a.concat(b)?),
        _ => None,
    };
    let mut params0 = KernelParams::initial(s.kernel, &pooled_emb, pooled_aux.as_ref());
    params0.eps0 = s.eps0;
    let kernel_params = optimize_kernel(&cal_x, &cal_y, &params0, s.optimize_steps, s.learning_rate)?;

    let trial_root = child_seed(s.seed, 2);
    let trials: Vec<TrialRecord> = (0..s.trials)
        .into_par_iter()
        .map(|t| {
            let seed = child_seed(trial_root, t as u64);
            let mut clean_draw = clean_pool.clone();
            let (picked, _) = clean_draw.partial_shuffle(&mut substream(seed, 0), per_trial_clean);
            let clean_rows = picked[..s.batch_size].to_vec();
            let test_rows = match s.mode {
                StudyMode::Type1 => picked[s.batch_size..].to_vec(),
                StudyMode::Power => {
                    let mut adv_draw = test_pool.clone();
                    let (p, _) = adv_draw.partial_shuffle(&mut substream(seed, 1), s.batch_size);
                    p.to_vec()
                }
            };
            let x = featurizer.sample_set(data.clean.select(&clean_rows)?)?;
            let y = featurizer.sample_set(test_cloud.select(&test_rows)?)?;
            let outcome = permutation_test(&x, &y, &kernel_params, s.permutations, s.alpha, seed)?;
            Ok(TrialRecord {
                trial: t,
                seed,
                outcome,
                clean_rows,
                test_rows,
            })
        })
        .collect::<Result<_>>()?;

    let rejection_rate =
        trials.iter().filter(|t| t.outcome.reject).count() as f64 / trials.len() as f64;
    Ok(DetectionReport {
        mode: s.mode,
        kernel: s.kernel,
        seed: s.seed,
        kernel_params,
        holdout_rows,
        calibration_clean_rows,
        calibration_test_rows,
        trials,
        rejection_rate,
    })
}

/// Loads the files named by `cfg` and runs [`run_detection`].
pub fn detection_study(cfg: &ExperimentConfig) -> Result<DetectionReport> {
    run_detection(&DetectionData::load(cfg)?, &cfg.settings())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatedTrial {
    pub trial: usize,
    pub outcome: TestOutcome,
}

/// Repeated two-sample tests between two fixed sets: trial `t` draws
/// `batch_size` rows from each side without replacement (seed derived from
/// `seed` and `t`) and runs a permutation test on them.
pub fn repeated_tests(
    x: &SampleSet,
    y: &SampleSet,
    params: &KernelParams,
    batch_size: usize,
    trials: usize,
    permutations: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<RepeatedTrial>> {
    if batch_size > x.len() || batch_size > y.len() {
        return Err(Error::InvalidInput(format!(
            "batch size {batch_size} exceeds the available rows ({} and {})",
            x.len(),
            y.len()
        )));
    }
    let subset = |set: &SampleSet, rows: &[usize]| -> Result<SampleSet> {
        SampleSet::new(set.emb().select(rows)?, set.aux().map(|a| a.select(rows)).transpose()?)
    };
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = child_seed(seed, t as u64);
            let mut xr: Vec<usize> = (0..x.len()).collect();
            let mut yr: Vec<usize> = (0..y.len()).collect();
            let (xs, _) = xr.partial_shuffle(&mut substream(trial_seed, 0), batch_size);
            let (ys, _) = yr.partial_shuffle(&mut substream(trial_seed, 1), batch_size);
            let outcome = permutation_test(
                &subset(x, xs)?,
                &subset(y, ys)?,
                params,
                permutations,
                alpha,
                trial_seed,
            )?;
            Ok(RepeatedTrial { trial: t, outcome })
        })
        .collect()
}
