use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_AGE_BINS: usize = 6;

const PROPORTION_TOL: f64 = 1e-9;

const DEFAULT_LABELS: [&str; NUM_AGE_BINS] = ["18-29", "30-39", "40-49", "50-59", "60-69", "70+"];
const DEFAULT_MIDPOINTS: [f64; NUM_AGE_BINS] = [23.5, 34.5, 44.5, 54.5, 64.5, 77.0];
/// Expected age at death for someone alive at each bin's midpoint.
const DEFAULT_LIFE_EXPECTANCY: [f64; NUM_AGE_BINS] = [81.4, 81.7, 82.1, 82.8, 84.1, 87.6];

const BUNDLED_ARRIVALS: &str = include_str!("../../data/arrivals.csv");
const BUNDLED_AGES: &str = include_str!("../../data/age_table.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeGroup {
    pub label: String,
    /// Share of arriving patients in this bin.
    pub proportion: f64,
    /// Daily probability that a patient in a bed recovers.
    pub recovery_prob: f64,
    /// Daily probability that a patient in a bed dies.
    pub death_prob: f64,
    pub life_expectancy: f64,
    /// Age in years used for scoring and for life-years.
    pub midpoint_age: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Expected arrivals per day.
    pub days: Vec<f64>,
    pub age_groups: Vec<AgeGroup>,
    pub waiting_death_prob: f64,
    pub beds: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidScenario(m));
        if self.days.is_empty() {
            return fail("no arrival days".into());
        }
        if let Some(d) = self.days.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return fail(format!("day {d} has invalid expected arrivals {}", self.days[d]));
        }
        if self.age_groups.len() != NUM_AGE_BINS {
            return fail(format!("expected {NUM_AGE_BINS} age groups, found {}", self.age_groups.len()));
        }
        let total: f64 = self.age_groups.iter().map(|g| g.proportion).sum();
        if (total - 1.0).abs() > PROPORTION_TOL {
            return fail(format!("age proportions sum to {total}, not 1"));
        }
        for g in &self.age_groups {
            let probs = [g.proportion, g.recovery_prob, g.death_prob];
            if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return fail(format!("age group {}: probabilities must lie in [0, 1]", g.label));
            }
            let resolve = g.recovery_prob + g.death_prob;
            if resolve > 1.0 + PROPORTION_TOL {
                return fail(format!("age group {}: recovery + death = {resolve} > 1", g.label));
            }
            if resolve <= 0.0 {
                return fail(format!("age group {}: patients in a bed never leave it", g.label));
            }
            if !g.life_expectancy.is_finite() || !g.midpoint_age.is_finite() {
                return fail(format!("age group {}: non-finite ages", g.label));
            }
        }
        if !(0.0..=1.0).contains(&self.waiting_death_prob) {
            return fail(format!("waiting death probability {} outside [0, 1]", self.waiting_death_prob));
        }
        if self.beds == 0 {
            return fail("bed count must be positive".into());
        }
        Ok(())
    }

    pub fn peak_arrivals(&self) -> f64 {
        self.days.iter().copied().fold(0.0, f64::max)
    }
}

/// Settings that the CSV inputs do not carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub waiting_death_prob: f64,
    /// Mean days in a bed before recovery or death.
    pub mean_stay_days: f64,
    /// Fixed bed count; when absent, sized from `demand_ratio`.
    pub beds: Option<usize>,
    /// Peak bed demand divided by capacity.
    pub demand_ratio: f64,
    pub midpoint_ages: [f64; NUM_AGE_BINS],
    pub life_expectancy: [f64; NUM_AGE_BINS],
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            waiting_death_prob: 0.10,
            mean_stay_days: 10.0,
            beds: None,
            demand_ratio: 2.0,
            midpoint_ages: DEFAULT_MIDPOINTS,
            life_expectancy: DEFAULT_LIFE_EXPECTANCY,
        }
    }
}

impl ScenarioConfig {
    /// Beds such that the peak steady-state occupancy is `demand_ratio`
    /// times capacity.
    pub fn bed_count(&self, peak_arrivals: f64) -> usize {
        self.beds.unwrap_or_else(|| {
            let demand = peak_arrivals * self.mean_stay_days;
            ((demand / self.demand_ratio).round() as usize).max(1)
        })
    }
}

/// Read and validate a scenario from the arrivals and age-table CSV files.
///
/// Arrivals have columns `date,count`; the age table has
/// `bin,proportion,survival-rate` with one row per age bin, youngest first.
/// A patient in a bed resolves each day with probability
/// `1 / mean_stay_days`, surviving with the bin's survival rate.
pub fn load_scenario(arrivals: &Path, ages: &Path, config: &ScenarioConfig) -> Result<Scenario> {
    let a = std::fs::read_to_string(arrivals).map_err(|e| Error::io(arrivals, e))?;
    let g = std::fs::read_to_string(ages).map_err(|e| Error::io(ages, e))?;
    parse_scenario(&a, arrivals, &g, ages, config)
}

/// Like [`load_scenario`] but from in-memory CSV text; the paths only label errors.
pub fn parse_scenario(
    arrivals_csv: &str,
    arrivals_path: &Path,
    ages_csv: &str,
    ages_path: &Path,
    config: &ScenarioConfig,
) -> Result<Scenario> {
    if config.mean_stay_days.is_nan() || config.mean_stay_days < 1.0 {
        return Err(Error::InvalidScenario(format!(
            "mean stay must be at least one day, got {}",
            config.mean_stay_days
        )));
    }
    let days = parse_arrivals(arrivals_csv, arrivals_path)?;
    let resolve = 1.0 / config.mean_stay_days;
    let age_groups = parse_ages(ages_csv, ages_path)?
        .into_iter()
        .enumerate()
        .map(|(i, (label, proportion, survival))| AgeGroup {
            label,
            proportion,
            recovery_prob: resolve * survival,
            death_prob: resolve * (1.0 - survival),
            life_expectancy: config.life_expectancy[i],
            midpoint_age: config.midpoint_ages[i],
        })
        .collect();
    let peak = days.iter().copied().fold(0.0, f64::max);
    let scenario = Scenario {
        beds: config.bed_count(peak),
        days,
        age_groups,
        waiting_death_prob: config.waiting_death_prob,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// The synthetic scenario shipped with the crate.
pub fn bundled_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    parse_scenario(
        BUNDLED_ARRIVALS,
        Path::new("data/arrivals.csv"),
        BUNDLED_AGES,
        Path::new("data/age_table.csv"),
        config,
    )
}

pub fn default_age_labels() -> [&'static str; NUM_AGE_BINS] {
    DEFAULT_LABELS
}

struct CsvTable<'a> {
    path: &'a Path,
    reader: csv::Reader<&'a [u8]>,
    columns: Vec<usize>,
}

impl<'a> CsvTable<'a> {
    /// Open `text` and locate each of `wanted`; each entry lists accepted
    /// spellings of one column.
    fn open(text: &'a str, path: &'a Path, wanted: &[&[&str]]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| parse_error(path, 1, e.to_string()))?
            .clone();
        let columns = wanted
            .iter()
            .map(|names| {
                headers
                    .iter()
                    .position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
                    .ok_or_else(|| parse_error(path, 1, format!("missing column `{}`", names[0])))
            })
            .collect::<Result<_>>()?;
        Ok(CsvTable { path, reader, columns })
    }

    /// Rows as (line number, selected fields).
    fn rows(&mut self) -> Result<Vec<(usize, Vec<String>)>> {
        let mut out = Vec::new();
        for record in self.reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_error(self.path, line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let fields = self
                .columns
                .iter()
                .map(|&c| record.get(c).unwrap_or("").to_string())
                .collect();
            out.push((line, fields));
        }
        Ok(out)
    }
}

fn parse_error(path: &Path, line: usize, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn parse_number(path: &Path, line: usize, column: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_error(path, line, format!("`{column}` is not a number: {raw:?}")))
}

fn parse_arrivals(text: &str, path: &Path) -> Result<Vec<f64>> {
    let mut table = CsvTable::open(text, path, &[&["date"], &["count"]])?;
    let rows = table.rows()?;
    if rows.is_empty() {
        return Err(parse_error(path, 1, "no arrival rows".into()));
    }
    rows.into_iter()
        .map(|(line, f)| {
            let count = parse_number(path, line, "count", &f[1])?;
            if count < 0.0 {
                return Err(parse_error(path, line, format!("negative count {count}")));
            }
            Ok(count)
        })
        .collect()
}

fn parse_ages(text: &str, path: &Path) -> Result<Vec<(String, f64, f64)>> {
    let mut table = CsvTable::open(
        text,
        path,
        &[&["bin"], &["proportion"], &["survival-rate", "survival_rate"]],
    )?;
    let rows = table.rows()?;
    let last_line = rows.last().map_or(1, |r| r.0);
    if rows.len() != NUM_AGE_BINS {
        return Err(parse_error(
            path,
            last_line,
            format!("expected {NUM_AGE_BINS} age bins, found {}", rows.len()),
        ));
    }
    let mut out = Vec::with_capacity(NUM_AGE_BINS);
    for (line, f) in rows {
        let proportion = parse_number(path, line, "proportion", &f[1])?;
        let survival = parse_number(path, line, "survival-rate", &f[2])?;
        if !(0.0..=1.0).contains(&proportion) {
            return Err(parse_error(path, line, format!("proportion {proportion} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&survival) {
            return Err(parse_error(path, line, format!("survival rate {survival} outside [0, 1]")));
        }
        out.push((f[0].clone(), proportion, survival));
    }
    let total: f64 = out.iter().map(|r| r.1).sum();
    if (total - 1.0).abs() > PROPORTION_TOL {
        return Err(parse_error(path, last_line, format!("proportions sum to {total}, not 1")));
    }
    Ok(out)
}
