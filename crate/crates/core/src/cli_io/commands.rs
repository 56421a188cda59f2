use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::ingest::{ingest_csv, profile_curve, write_csv, DailyProfileRecord, Pollutant, HOURS};
use super::who::who_flag;
use crate::curve::SampledCurve;
use crate::error::{Error, Result};
use crate::ewma::{init_state, ChartPoint, ControlLimits, EwmaConfig, EwmaState, Session};
use crate::frechet::{estimate_frechet_mean, FrechetMeanResult};
use crate::sim::{SimParams, PARAM_NAMES};
use crate::synth::{generate_ic_set, inject_shift, Shift, SynthSpec};

/// Phase I output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Databank {
    pub pollutant: Option<Pollutant>,
    pub dates: Vec<NaiveDate>,
    pub config: RunConfig,
    pub result: FrechetMeanResult,
}

/// Calibrated limits together with the settings they depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitsFile {
    pub ewma: EwmaConfig,
    pub limits: ControlLimits,
    pub initial_state: EwmaState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phase1Summary {
    pub days: usize,
    pub skipped: usize,
    pub frechet_variance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub deviance_ucl: f64,
    pub databank: PathBuf,
    pub limits: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phase2Summary {
    pub lambda: f64,
    pub steps: usize,
    pub alarms: usize,
    pub param_alarms: usize,
    pub who_flags: usize,
    pub csv: PathBuf,
    pub jsonl: PathBuf,
    pub state: PathBuf,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(serde_json::from_str(&text)?)
}

/// Phase I: estimates the template from a training file and writes
/// `databank.json` and `limits.json` into `out_dir`.
pub fn cmd_phase1(train: &Path, pollutant: Pollutant, cfg: &RunConfig, out_dir: &Path) -> Result<Phase1Summary> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let ingested = ingest_csv(train, pollutant)?;
    let total = ingested.records.len();
    let records: Vec<DailyProfileRecord> = ingested
        .records
        .into_iter()
        .filter(|r| !cfg.who_ic_only || !who_flag(r).flagged)
        .collect();
    if records.is_empty() {
        return Err(Error::Config(format!(
            "{}: no training days left after filtering",
            train.display()
        )));
    }
    let curves = records
        .iter()
        .map(|r| profile_curve(r, grid))
        .collect::<Result<Vec<SampledCurve>>>()?;
    let result = estimate_frechet_mean(&curves, &cfg.frechet)?;
    let (state, limits) = init_state(&result.f0, &result, &cfg.ewma)?;

    fs::create_dir_all(out_dir)?;
    let databank_path = out_dir.join("databank.json");
    let limits_path = out_dir.join("limits.json");
    let summary = Phase1Summary {
        days: records.len(),
        skipped: ingested.warnings.len() + (total - records.len()),
        frechet_variance: result.frechet_variance,
        iterations: result.iterations,
        converged: result.converged,
        deviance_ucl: limits.deviance_ucl,
        databank: databank_path.clone(),
        limits: limits_path.clone(),
    };
    write_json(
        &databank_path,
        &Databank {
            pollutant: Some(pollutant),
            dates: records.iter().map(|r| r.date).collect(),
            config: cfg.clone(),
            result,
        },
    )?;
    write_json(
        &limits_path,
        &LimitsFile {
            ewma: cfg.ewma.clone(),
            limits,
            initial_state: state,
        },
    )?;
    Ok(summary)
}

/// Settings that change the calibrated limits.
fn calibration_key(c: &EwmaConfig) -> EwmaConfig {
    EwmaConfig { enrich: false, ..c.clone() }
}

#[derive(Serialize)]
struct StreamLine<'a> {
    date: NaiveDate,
    #[serde(flatten)]
    point: &'a ChartPoint,
    who: bool,
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Phase II: monitors every day of `test` against the databank and writes
/// `<prefix>.csv`, `<prefix>.jsonl` and `<prefix>_state.json`.
pub fn cmd_phase2(
    test: &Path,
    pollutant: Pollutant,
    databank: &Path,
    limits: Option<&Path>,
    cfg: &RunConfig,
    out_prefix: &Path,
) -> Result<Phase2Summary> {
    cfg.validate()?;
    let bank: Databank = read_json(databank)?;
    let grid = bank.result.grid();
    if let Some(m) = cfg.grid_points {
        if m != grid.len() {
            return Err(Error::Incompatible(format!(
                "requested grid of {m} points, databank uses {}",
                grid.len()
            )));
        }
    }
    if let Some(p) = bank.pollutant {
        if p != pollutant {
            return Err(Error::Incompatible(format!("databank was built for {p}, test data is {pollutant}")));
        }
    }
    let (initial, control) = match limits {
        Some(path) => {
            let file: LimitsFile = read_json(path)?;
            if calibration_key(&file.ewma) != calibration_key(&cfg.ewma) {
                return Err(Error::Incompatible(format!(
                    "{} was calibrated with different chart settings (lambda {}, level {}); \
                     omit it to recalibrate",
                    path.display(),
                    file.ewma.lambda,
                    file.ewma.limit_level
                )));
            }
            if file.initial_state.f_tilde.grid() != grid {
                return Err(Error::Incompatible("limits and databank use different grids".into()));
            }
            (file.initial_state, file.limits)
        }
        None => init_state(&bank.result.f0, &bank.result, &cfg.ewma)?,
    };
    let mut session = Session::resume(&bank.result, cfg.ewma.clone(), control, initial)?;

    let records = ingest_csv(test, pollutant)?.records;
    if let Some(dir) = out_prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let with_suffix = |s: &str| {
        let mut p = out_prefix.as_os_str().to_owned();
        p.push(s);
        PathBuf::from(p)
    };
    let csv_path = with_suffix(".csv");
    let jsonl_path = with_suffix(".jsonl");
    let state_path = with_suffix("_state.json");

    let mut csv = csv::Writer::from_path(&csv_path)?;
    csv.write_record([
        "step", "date", "D", "Dtilde", "alpha", "beta", "kappa", "zeta", "alpha_t", "beta_t", "kappa_t", "zeta_t",
        "ooc", "ooc_params", "who",
    ])?;
    let mut jsonl = BufWriter::new(fs::File::create(&jsonl_path)?);
    let mut summary = Phase2Summary {
        lambda: cfg.ewma.lambda,
        steps: 0,
        alarms: 0,
        param_alarms: 0,
        who_flags: 0,
        csv: csv_path.clone(),
        jsonl: jsonl_path.clone(),
        state: state_path.clone(),
    };
    for r in &records {
        let curve = profile_curve(r, grid)?;
        let point = session.step(&curve)?;
        let who = who_flag(r).flagged;
        let params: Vec<&str> = (0..4).filter(|&c| point.ooc_params[c]).map(|c| PARAM_NAMES[c]).collect();
        let mut row = vec![point.step.to_string(), r.date.to_string(), point.d.to_string(), point.d_tilde.to_string()];
        row.extend(point.params.to_array().iter().map(f64::to_string));
        row.extend(point.theta_tilde.to_array().iter().map(f64::to_string));
        row.push(flag(point.ooc).into());
        row.push(params.join("|"));
        row.push(flag(who).into());
        csv.write_record(&row)?;
        serde_json::to_writer(
            &mut jsonl,
            &StreamLine {
                date: r.date,
                point: &point,
                who,
            },
        )?;
        jsonl.write_all(b"\n")?;

        summary.steps += 1;
        summary.alarms += usize::from(point.ooc);
        summary.param_alarms += usize::from(point.any_param_ooc());
        summary.who_flags += usize::from(who);
    }
    csv.flush()?;
    jsonl.flush()?;
    write_json(&state_path, &session.state)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    /// Centred training set.
    #[default]
    Training,
    /// Monitoring stream, optionally shifted.
    Stream,
}

/// Input of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSpec {
    pub synth: SynthSpec,
    pub kind: StreamKind,
    pub shift: Shift,
    pub at_step: usize,
    pub start_date: NaiveDate,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        SimulateSpec {
            synth: SynthSpec::default(),
            kind: StreamKind::Training,
            shift: Shift::NONE,
            at_step: 1,
            start_date: NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date"),
        }
    }
}

impl SimulateSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }
}

/// Ground truth written next to a simulated file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub spec: SimulateSpec,
    pub base: SampledCurve,
    pub params: Vec<SimParams>,
    pub dates: Vec<NaiveDate>,
}

/// Writes a simulated data file in the ingestion layout plus its truth.
/// Each curve is read off at the hours `t = k / 23`.
pub fn cmd_simulate(spec: &SimulateSpec, out_csv: &Path, truth_json: &Path) -> Result<usize> {
    spec.synth
        .validate()
        .map_err(|e| Error::Config(format!("synth.{}", e.to_string().trim_start_matches("configuration error: "))))?;
    let set = match spec.kind {
        StreamKind::Training => generate_ic_set(&spec.synth)?,
        StreamKind::Stream => inject_shift(&spec.synth, &spec.shift, spec.at_step)?,
    };
    let mut records = Vec::with_capacity(set.curves.len());
    for (j, c) in set.curves.iter().enumerate() {
        let date = spec
            .start_date
            .checked_add_days(Days::new(j as u64))
            .ok_or_else(|| Error::Config("start_date: calendar overflow".into()))?;
        let steps = (c.grid().len() - 1) as f64;
        let mut values = [0.0; HOURS];
        for (k, v) in values.iter_mut().enumerate() {
            // index-space position keeps 24-node grids exact
            *v = c.eval_pos(k as f64 * steps / (HOURS - 1) as f64);
            if *v < 0.0 {
                return Err(Error::Config(format!(
                    "synth: simulated concentration {v} on {date} is negative; raise the base level or lower the noise"
                )));
            }
        }
        records.push(DailyProfileRecord {
            date,
            pollutant: Pollutant::CO,
            values,
            filled: Vec::new(),
        });
    }
    for p in [out_csv, truth_json] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
    }
    let mut w = BufWriter::new(fs::File::create(out_csv)?);
    write_csv(&records, &mut w)?;
    w.flush()?;
    write_json(
        truth_json,
        &Truth {
            spec: spec.clone(),
            base: set.base,
            params: set.params,
            dates: records.iter().map(|r| r.date).collect(),
        },
    )?;
    Ok(records.len())
}

/// Threshold verdict for every day: `date,flagged,statistic,rules`.
/// Returns the number of days and of flagged days.
pub fn cmd_who_check<W: Write>(path: &Path, pollutant: Pollutant, out: W) -> Result<(usize, usize)> {
    let records = ingest_csv(path, pollutant)?.records;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", "flagged", "statistic", "rules"])?;
    let mut flagged = 0;
    for r in &records {
        let v = who_flag(r);
        flagged += usize::from(v.flagged);
        let rules: Vec<String> = v.violated.iter().map(|x| x.to_string()).collect();
        w.write_record([
            r.date.to_string(),
            flag(v.flagged).to_string(),
            v.statistic.map_or(String::new(), |s| s.to_string()),
            rules.join("|"),
        ])?;
    }
    w.flush()?;
    Ok((records.len(), flagged))
}
