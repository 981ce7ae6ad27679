use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use epiforge_core::analytics::{all_rates, death_rates, recovery_rates};
use epiforge_core::timeseries::{
    aggregate_provinces, cumulative_to_daily, fill_missing, lag_align, prefix_sum, SeriesForm,
    SeriesSource,
};
use epiforge_core::{CountrySnapshot, DatedSeries, Metric};
use proptest::prelude::*;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 22).unwrap()
}

fn cumulative() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u32..5000, 1..120).prop_map(|incs| {
        incs.iter()
            .scan(0.0, |acc, &d| {
                *acc += d as f64;
                Some(*acc)
            })
            .collect()
    })
}

fn dated(values: &[f64], gaps: &[bool]) -> Vec<(NaiveDate, f64)> {
    values
        .iter()
        .enumerate()
        .filter(|(k, _)| !gaps.get(*k).copied().unwrap_or(false))
        .map(|(k, v)| (start() + Days::new(k as u64), *v))
        .collect()
}

struct MapSource(BTreeMap<NaiveDate, f64>);

impl SeriesSource for MapSource {
    fn value_on(&self, _: &str, _: Metric, _: SeriesForm, d: NaiveDate) -> Result<Option<f64>, String> {
        Ok(self.0.get(&d).copied())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn daily_then_prefix_sum_is_identity(values in cumulative()) {
        let s = DatedSeries::from_values("AA", Metric::Confirmed, start(), &values).unwrap();
        let daily = cumulative_to_daily(&s).unwrap();
        prop_assert!(daily.warnings.is_empty());
        prop_assert_eq!(prefix_sum(&daily.series), s);
    }

    #[test]
    fn corrections_survive_round_trip(values in prop::collection::vec(0u32..100_000, 2..60)) {
        // arbitrary non-negative totals, so some increments are negative
        let values: Vec<f64> = values.into_iter().map(f64::from).collect();
        let s = DatedSeries::from_values("AA", Metric::Deaths, start(), &values).unwrap();
        let daily = cumulative_to_daily(&s).unwrap();
        let negatives = values.windows(2).filter(|w| w[1] < w[0]).count();
        prop_assert_eq!(daily.warnings.len(), negatives);
        prop_assert_eq!(prefix_sum(&daily.series), s);
    }

    #[test]
    fn province_sum_ignores_order(provinces in prop::collection::vec(cumulative(), 1..6), seed in any::<u64>()) {
        let series: Vec<DatedSeries> = provinces
            .iter()
            .map(|v| DatedSeries::from_values("AA", Metric::Confirmed, start(), v).unwrap())
            .collect();
        let mut shuffled = series.clone();
        let k = (seed as usize) % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        prop_assert_eq!(
            aggregate_provinces(&series).unwrap().series,
            aggregate_provinces(&shuffled).unwrap().series
        );
    }

    #[test]
    fn lag_pairs_respect_offset(dep in prop::collection::vec(0u32..20, 1..60), cov in prop::collection::vec(-10.0f64..40.0, 1..60), lag in 0u32..10) {
        let dep: Vec<f64> = dep.into_iter().map(f64::from).collect();
        let d = DatedSeries::with_form("AA", Metric::Confirmed, SeriesForm::Daily, dated(&dep, &[])).unwrap();
        let c = DatedSeries::new("AA", Metric::Temperature, dated(&cov, &[])).unwrap();
        match lag_align(&d, &c, lag) {
            Ok(sample) => {
                prop_assert!(sample.len() <= dep.len().min(cov.len()));
                // rebuild the expected pairs by walking dates directly
                let mut x = Vec::new();
                let mut y = Vec::new();
                for (k, v) in dep.iter().enumerate() {
                    if *v != 0.0 && k >= lag as usize && k - (lag as usize) < cov.len() {
                        x.push(cov[k - lag as usize]);
                        y.push(*v);
                    }
                }
                prop_assert_eq!(sample.x(), &x[..]);
                prop_assert_eq!(sample.y(), &y[..]);
            }
            Err(_) => {
                let any = dep.iter().enumerate().any(|(k, v)| *v != 0.0 && k >= lag as usize && k - (lag as usize) < cov.len());
                prop_assert!(!any);
            }
        }
    }

    #[test]
    fn fill_is_idempotent(values in cumulative(), gaps in prop::collection::vec(any::<bool>(), 120), store_has in prop::collection::vec(any::<bool>(), 120)) {
        let mut pts = dated(&values, &gaps);
        if pts.is_empty() {
            pts.push((start(), values[0]));
        }
        let s = DatedSeries::new("AA", Metric::Confirmed, pts).unwrap();
        let store = MapSource(
            dated(&values, &[])
                .into_iter()
                .enumerate()
                .filter(|(k, _)| store_has[*k])
                .map(|(_, p)| p)
                .collect(),
        );
        let once = fill_missing(&s, &store);
        let twice = fill_missing(&once.series, &store);
        prop_assert_eq!(&once.series, &twice.series);
        prop_assert_eq!(once.unresolved, twice.unresolved);
    }

    #[test]
    fn rate_percentages_sum_to_hundred(affected in 1u32..10_000_000, d_share in 0.0f64..1.0, r_share in 0.0f64..1.0, pop in 1e5f64..1e9, area in 1.0f64..1e5) {
        let affected = affected as f64;
        let deaths = (affected * d_share).floor();
        let recovered = ((affected - deaths) * r_share).floor();
        let s = CountrySnapshot::from_counts("AA", start(), affected, deaths, recovered, pop, area);
        let [d, a, r] = all_rates(&s).unwrap();
        let total = d.wrt_affected.unwrap() + a.wrt_affected.unwrap() + r.wrt_affected.unwrap();
        prop_assert!((total - 100.0).abs() < 1e-9);
        if deaths + recovered > 0.0 {
            let complement = recovered / (deaths + recovered) * 100.0;
            prop_assert!((d.wrt_recovered.unwrap() + complement - 100.0).abs() < 1e-9);
        }
        for v in [d.wrt_affected, d.wrt_recovered, a.wrt_affected, a.wrt_recovered, r.wrt_affected].into_iter().flatten() {
            prop_assert!((0.0..=100.0).contains(&v));
        }
    }

    #[test]
    fn rates_scale_with_counts(affected in 1u32..1_000_000, d_share in 0.0f64..1.0, k in 0.5f64..20.0) {
        let affected = affected as f64;
        let deaths = (affected * d_share).floor();
        let s = CountrySnapshot::from_counts("AA", start(), affected, deaths, 0.0, 1e7, 100.0);
        let t = CountrySnapshot::from_counts("AA", start(), k * affected, k * deaths, 0.0, 1e7, 100.0);
        let (a, b) = (death_rates(&s).unwrap(), death_rates(&t).unwrap());
        prop_assert!((a.wrt_affected.unwrap() - b.wrt_affected.unwrap()).abs() < 1e-9);
        prop_assert!((k * a.per_area.unwrap() - b.per_area.unwrap()).abs() <= 1e-9 * b.per_area.unwrap().max(1.0));
        prop_assert!((k * a.per_million_population.unwrap() - b.per_million_population.unwrap()).abs() <= 1e-9 * b.per_million_population.unwrap().max(1.0));
        prop_assert_eq!(recovery_rates(&s).unwrap().wrt_recovered, None);
    }
}
