//! Per-condition evaluation reports.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estoi::estoi;
use crate::datagen::MixtureRecord;
use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::training::si_snr_db;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScore {
    pub clean_id: String,
    pub noise_id: String,
    pub target_snr_db: f64,
    pub si_snr_db: f64,
    pub estoi: f64,
    /// Externally computed PESQ, if supplied.
    pub pesq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub condition: String,
    pub n: usize,
    pub mean_si_snr: f64,
    pub mean_estoi: f64,
    pub mean_pesq: Option<f64>,
    /// Utterances dropped because a metric failed on them.
    pub excluded: usize,
    pub utterances: Vec<UtteranceScore>,
}

impl EvalReport {
    /// Builds a report whose means are the plain averages of `rows`.
    pub fn from_rows(condition: impl Into<String>, rows: Vec<UtteranceScore>, excluded: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::validation("no utterances could be scored"));
        }
        let n = rows.len();
        let mean = |f: &dyn Fn(&UtteranceScore) -> f64| rows.iter().map(f).sum::<f64>() / n as f64;
        let mean_si_snr = mean(&|r| r.si_snr_db);
        let mean_estoi = mean(&|r| r.estoi);
        let mean_pesq = rows
            .iter()
            .map(|r| r.pesq)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / n as f64);
        Ok(EvalReport {
            condition: condition.into(),
            n,
            mean_si_snr,
            mean_estoi,
            mean_pesq,
            excluded,
            utterances: rows,
        })
    }

    /// Attaches externally computed PESQ scores, one per utterance.
    pub fn with_pesq(self, pesq: &[f64]) -> Result<Self> {
        if pesq.len() != self.n {
            return Err(Error::shape(format!("{} PESQ values", self.n), pesq.len()));
        }
        let rows = self
            .utterances
            .into_iter()
            .zip(pesq)
            .map(|(r, &p)| UtteranceScore { pesq: Some(p), ..r })
            .collect();
        EvalReport::from_rows(self.condition, rows, self.excluded)
    }

    /// Tab-separated per-utterance rows preceded by a `#` summary line.
    pub fn to_tsv(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let mut out = format!(
            "# condition={} n={} mean_si_snr={:.4} mean_estoi={:.4} mean_pesq={} excluded={}\n",
            self.condition,
            self.n,
            self.mean_si_snr,
            self.mean_estoi,
            fmt_opt(self.mean_pesq),
            self.excluded
        );
        out.push_str("clean_id\tnoise_id\ttarget_snr_db\tsi_snr_db\testoi\tpesq\n");
        for r in &self.utterances {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}",
                r.clean_id,
                r.noise_id,
                r.target_snr_db,
                r.si_snr_db,
                r.estoi,
                fmt_opt(r.pesq)
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<stem>.tsv` and `<stem>.json`.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let tsv = dir.join(format!("{stem}.tsv"));
        std::fs::write(&tsv, self.to_tsv()).map_err(|e| Error::io(&tsv, e))?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, self.to_json()?).map_err(|e| Error::io(&json, e))
    }
}

/// Scores `enhance(mixture)` against the clean target for every record.
/// Utterances whose enhancement or metrics fail are excluded and counted.
pub fn evaluate<F>(condition: &str, records: &[MixtureRecord], enhance: F) -> Result<EvalReport>
where
    F: Fn(&Waveform<f32>) -> Result<Waveform<f32>> + Sync,
{
    if records.is_empty() {
        return Err(Error::validation("test set is empty"));
    }
    let scored: Vec<Result<UtteranceScore>> = records
        .par_iter()
        .map(|r| {
            let out = enhance(&r.mixture)?;
            Ok(UtteranceScore {
                clean_id: r.clean_id.clone(),
                noise_id: r.noise_id.clone(),
                target_snr_db: r.target_snr_db,
                si_snr_db: si_snr_db(&out.samples, &r.clean.samples)?,
                estoi: estoi(&r.clean, &out)?,
                pesq: None,
            })
        })
        .collect();
    let mut rows = Vec::with_capacity(scored.len());
    let mut excluded = 0;
    for (i, s) in scored.into_iter().enumerate() {
        match s {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::warn!("{condition}: excluding utterance {i}: {e}");
                excluded += 1;
            }
        }
    }
    if excluded > 0 {
        log::warn!("{condition}: excluded {excluded} of {} utterances", records.len());
    }
    EvalReport::from_rows(condition, rows, excluded)
}

/// The unprocessed-mixture condition.
pub fn evaluate_noisy(records: &[MixtureRecord]) -> Result<EvalReport> {
    evaluate("noisy", records, |w| Ok(w.clone()))
}
