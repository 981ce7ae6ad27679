//! Deterministic fixture set: five synthetic countries generated from known rates.
//!
//! Shared by the `make_fixtures` example (which writes `fixtures/`) and the tests
//! (which regenerate into a temp dir and compare).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{Days, NaiveDate};
use epiforge_core::calibration::synthetic_history;
use epiforge_core::epi_model::{AGE_CLASSES, DEFAULT_STEP};
use epiforge_core::ModelParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Truth {
    pub code: &'static str,
    pub name: &'static str,
    pub population: f64,
    pub beta: f64,
    pub lambda_r: f64,
    pub lambda_d: f64,
}

pub const TRUTHS: [Truth; 5] = [
    Truth { code: "AL", name: "Alphaland", population: 5e6, beta: 0.28, lambda_r: 0.07, lambda_d: 0.012 },
    Truth { code: "BR", name: "Borealia", population: 2e7, beta: 0.22, lambda_r: 0.06, lambda_d: 0.008 },
    Truth { code: "CE", name: "Centralia", population: 8e6, beta: 0.35, lambda_r: 0.10, lambda_d: 0.02 },
    Truth { code: "DU", name: "Dunmore", population: 3e6, beta: 0.18, lambda_r: 0.05, lambda_d: 0.006 },
    Truth { code: "EV", name: "Evergreen", population: 1.2e7, beta: 0.30, lambda_r: 0.09, lambda_d: 0.015 },
];

pub const DAYS: u32 = 60;
pub const INITIAL_INFECTED: f64 = 100.0;
pub const LAG: u64 = 5;

/// Province shares for BR, the one country reported by region.
const BR_PROVINCES: [(&str, f64); 3] = [("North", 0.5), ("Coast", 0.3), ("South", 0.2)];

const PYRAMID_SHARES: [f64; AGE_CLASSES] = [
    5.8, 6.0, 6.2, 6.4, 6.9, 7.1, 7.0, 6.8, 6.7, 6.5, 6.3, 6.0, 5.6, 4.9, 4.1, 6.7,
];

pub fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 1).unwrap()
}

impl Truth {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            beta: self.beta,
            lambda_r: self.lambda_r,
            lambda_d: self.lambda_d,
            mu: 0.0,
            gamma: 0.0,
        }
    }
}

fn matrix(f: impl Fn(usize, usize) -> f64) -> String {
    let mut out = String::new();
    for i in 0..AGE_CLASSES {
        let row: Vec<String> = (0..AGE_CLASSES).map(|j| f(i, j).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn contact_files() -> [(&'static str, String); 4] {
    let band = |lo: usize, hi: usize, i: usize, j: usize| (lo..=hi).contains(&i) && (lo..=hi).contains(&j);
    [
        ("home", matrix(|i, j| {
            let d = i.abs_diff(j) as f64;
            ((0.05 * (-d / 3.0).exp() + 0.01) * 1e4).round() / 1e4
        })),
        ("school", matrix(|i, j| if band(0, 3, i, j) && i.abs_diff(j) <= 1 { 0.15 } else { 0.005 })),
        ("work", matrix(|i, j| if band(4, 12, i, j) { 0.04 } else { 0.002 })),
        ("other", matrix(|_, _| 0.02)),
    ]
}

/// Writes the full fixture tree under `root`.
pub fn generate(root: &Path) {
    let data = root.join("data");
    fs::create_dir_all(data.join("contact")).unwrap();
    fs::create_dir_all(root.join("upstream")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2020);

    let mut countries = String::from(
        "country_code,name,area,population,gdp,literacy,mean_temperature,mean_rainfall,mean_humidity,pollution_index,healthcare_index,food_security_index,hospital_beds_per_10m,tests_per_million\n",
    );
    let mut cases = String::from("country_code,date,confirmed,deaths,recovered,province\n");
    let mut covariates = String::from("country_code,date,temperature_c,humidity_pct\n");
    let mut pyramids = String::from("country_code,age_bin_start,population\n");
    let mut live = BTreeMap::new();
    let mut truth_doc = BTreeMap::new();

    for (k, t) in TRUTHS.iter().enumerate() {
        let h = synthetic_history(t.code, t.params(), t.population, INITIAL_INFECTED, start(), DAYS, DEFAULT_STEP)
            .unwrap();
        let latest = h.last().unwrap();
        // socio-economic columns rise with index so the cross-sectional pairs have a direction
        let kf = k as f64;
        writeln!(
            countries,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            t.code,
            t.name,
            (t.population / 5e4).round(),
            t.population,
            1.5e4 + 4e3 * kf,
            80.0 + 3.0 * kf,
            12.0 + 2.5 * kf,
            700.0 + 90.0 * kf,
            55.0 + 4.0 * kf,
            30.0 + 9.0 * kf,
            50.0 + 7.0 * kf,
            60.0 + 6.0 * kf,
            20.0 + 5.0 * kf,
            8000.0 + 2500.0 * kf,
        )
        .unwrap();

        for s in &h {
            let row = [s.affected, s.dead, s.recovered];
            if t.code == "BR" {
                let mut left = row;
                for (n, (province, share)) in BR_PROVINCES.iter().enumerate() {
                    let part = if n + 1 == BR_PROVINCES.len() {
                        left
                    } else {
                        let p = row.map(|v| v * share);
                        for (l, v) in left.iter_mut().zip(p) {
                            *l -= v;
                        }
                        p
                    };
                    writeln!(cases, "{},{},{},{},{},{}", t.code, s.date, part[0], part[1], part[2], province).unwrap();
                }
            } else {
                writeln!(cases, "{},{},{},{},{},", t.code, s.date, row[0], row[1], row[2]).unwrap();
            }
        }

        // weather LAG days ahead of new cases: warm and dry days precede growth
        let peak = h.iter().map(|s| s.newly_affected).fold(0.0, f64::max);
        for s in &h[1..] {
            let x = s.newly_affected / peak;
            let temp = 10.0 + 15.0 * x + rng.random_range(-1.5..1.5);
            let hum = 80.0 - 30.0 * x + rng.random_range(-3.0..3.0);
            writeln!(
                covariates,
                "{},{},{:.2},{:.2}",
                t.code,
                s.date - Days::new(LAG),
                temp,
                hum
            )
            .unwrap();
        }

        let total: f64 = PYRAMID_SHARES.iter().sum();
        let mut assigned = 0.0;
        for (c, share) in PYRAMID_SHARES.iter().enumerate() {
            let pop = if c + 1 == AGE_CLASSES {
                t.population - assigned
            } else {
                (t.population * share / total).round()
            };
            assigned += pop;
            writeln!(pyramids, "{},{},{}", t.code, 5 * c, pop).unwrap();
        }

        let grow = |v: f64| (v * 1.03).round();
        live.insert(
            t.code,
            serde_json::json!({
                "affected": grow(latest.affected),
                "dead": grow(latest.dead),
                "recovered": grow(latest.recovered),
            }),
        );
        truth_doc.insert(
            t.code,
            serde_json::json!({
                "beta": t.beta,
                "lambda_r": t.lambda_r,
                "lambda_d": t.lambda_d,
                "population": t.population,
            }),
        );
    }

    fs::write(data.join("countries.csv"), countries).unwrap();
    fs::write(data.join("cases.csv"), cases).unwrap();
    fs::write(data.join("covariates.csv"), covariates).unwrap();
    fs::write(data.join("pyramids.csv"), pyramids).unwrap();
    for (name, body) in contact_files() {
        fs::write(data.join("contact").join(format!("{name}.csv")), body).unwrap();
    }
    let last = start() + Days::new(u64::from(DAYS));
    let upstream = serde_json::json!({ "date": last, "countries": live });
    fs::write(
        root.join("upstream/live.json"),
        serde_json::to_string_pretty(&upstream).unwrap() + "\n",
    )
    .unwrap();
    fs::write(
        root.join("truth.json"),
        serde_json::to_string_pretty(&truth_doc).unwrap() + "\n",
    )
    .unwrap();
}

/// Relative paths of every generated file, sorted.
pub fn files(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out.sort();
    out
}
