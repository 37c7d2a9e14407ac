use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    TTest,
    OneWayAnova,
    ChiSquare,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl GroupSummary {
    pub fn new(n: usize, mean: f64, sd: f64) -> Self {
        Self {
            n,
            mean,
            sd,
            min: None,
            max: None,
        }
    }

    /// Sample summary with the n − 1 standard deviation.
    pub fn from_values(v: &[f64]) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: v.len(),
            });
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            n: v.len(),
            mean,
            sd: var.sqrt(),
            min: v.iter().copied().reduce(f64::min),
            max: v.iter().copied().reduce(f64::max),
        })
    }

    fn check(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: self.n,
            });
        }
        if !(self.sd >= 0.0) || !self.mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "group summary needs finite mean and sd >= 0, got {} and {}",
                self.mean, self.sd
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub ss_between: f64,
    pub ss_within: f64,
    pub ms_between: f64,
    pub ms_within: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub test: TestKind,
    pub statistic: f64,
    /// One entry for t and chi-square, two for F.
    pub df: Vec<f64>,
    pub p: f64,
    pub groups: Vec<GroupSummary>,
    pub anova: Option<AnovaTable>,
    pub flags: Vec<String>,
}

fn pooled_variance(g1: &GroupSummary, g2: &GroupSummary) -> f64 {
    let df = (g1.n + g2.n - 2) as f64;
    ((g1.n - 1) as f64 * g1.sd * g1.sd + (g2.n - 1) as f64 * g2.sd * g2.sd) / df
}

/// Two-sided pooled-variance two-sample t-test from summary statistics.
pub fn t_test_summary(g1: GroupSummary, g2: GroupSummary) -> Result<StatReport> {
    g1.check()?;
    g2.check()?;
    let df = (g1.n + g2.n - 2) as f64;
    let se = (pooled_variance(&g1, &g2) * (1.0 / g1.n as f64 + 1.0 / g2.n as f64)).sqrt();
    let diff = g1.mean - g2.mean;
    let mut flags = Vec::new();
    let (t, p) = if se == 0.0 {
        flags.push("degenerate".to_string());
        if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = diff / se;
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    Ok(StatReport {
        test: TestKind::TTest,
        statistic: t,
        df: vec![df],
        p,
        groups: vec![g1, g2],
        anova: None,
        flags,
    })
}

/// One-way ANOVA over two groups from summary statistics.
pub fn one_way_anova_summary(g1: GroupSummary, g2: GroupSummary) -> Result<StatReport> {
    g1.check()?;
    g2.check()?;
    let (n1, n2) = (g1.n as f64, g2.n as f64);
    let grand = (n1 * g1.mean + n2 * g2.mean) / (n1 + n2);
    let ss_between = n1 * (g1.mean - grand).powi(2) + n2 * (g2.mean - grand).powi(2);
    let ss_within = (n1 - 1.0) * g1.sd * g1.sd + (n2 - 1.0) * g2.sd * g2.sd;
    let df_w = n1 + n2 - 2.0;
    let ms_between = ss_between;
    let ms_within = ss_within / df_w;
    let mut flags = Vec::new();
    let (f, p) = if ms_within == 0.0 {
        flags.push("zero within-group variance".to_string());
        if ss_between == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = ms_between / ms_within;
        let dist = FisherSnedecor::new(1.0, df_w).expect("positive df");
        (f, dist.sf(f).clamp(0.0, 1.0))
    };
    Ok(StatReport {
        test: TestKind::OneWayAnova,
        statistic: f,
        df: vec![1.0, df_w],
        p,
        groups: vec![g1, g2],
        anova: Some(AnovaTable {
            ss_between,
            ss_within,
            ms_between,
            ms_within,
        }),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn published_t_block() {
        let r = t_test_summary(
            GroupSummary::new(18, 0.238, 0.003),
            GroupSummary::new(17, 0.231, 0.008),
        )
        .unwrap();
        assert_eq!(r.df, vec![33.0]);
        assert!((3.0..=3.7).contains(&r.statistic), "t = {}", r.statistic);
        assert!(r.p < 0.005);
    }

    #[test]
    fn published_anova_block() {
        let r = one_way_anova_summary(
            GroupSummary::new(27, 23.847, 4.008),
            GroupSummary::new(27, 32.023, 3.689),
        )
        .unwrap();
        let a = r.anova.unwrap();
        assert!((a.ss_between - 902.4).abs() <= 0.5);
        assert!((a.ms_within - 14.84).abs() <= 0.05);
        assert!((r.statistic - 60.8).abs() <= 0.5);
        assert_eq!(r.df, vec![1.0, 52.0]);
    }

    #[test]
    fn textbook_pooled_t() {
        // sp^2 = 1, se = sqrt(1/2 + 1/2) = 1, t = -10, df = 2
        let r = t_test_summary(
            GroupSummary::new(2, 0.0, 1.0),
            GroupSummary::new(2, 10.0, 1.0),
        )
        .unwrap();
        assert!((r.statistic + 10.0).abs() < 1e-12);
        // two-sided p for t = 10 on 2 df: 1 - 10/sqrt(102)
        let expected = 1.0 - 10.0 / 102f64.sqrt();
        assert!((r.p - expected).abs() < 1e-9, "{} vs {expected}", r.p);
    }

    #[test]
    fn degenerate_cases() {
        let g = GroupSummary::new(5, 1.0, 0.5);
        let r = t_test_summary(g, g).unwrap();
        assert_eq!((r.statistic, r.p), (0.0, 1.0));
        let z = GroupSummary::new(5, 1.0, 0.0);
        let r = t_test_summary(z, z).unwrap();
        assert_eq!(r.p, 1.0);
        assert_eq!(r.flags, vec!["degenerate"]);
        let a = one_way_anova_summary(g, g).unwrap();
        assert_eq!(a.statistic, 0.0);
        let inf = one_way_anova_summary(z, GroupSummary::new(5, 2.0, 0.0)).unwrap();
        assert!(inf.statistic.is_infinite());
        assert!(t_test_summary(GroupSummary::new(1, 0.0, 1.0), g).is_err());
    }

    #[test]
    fn from_values_summary() {
        let g = GroupSummary::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(g.mean, 2.5);
        assert!((g.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!((g.min, g.max), (Some(1.0), Some(4.0)));
    }

    proptest! {
        #[test]
        fn f_is_t_squared(
            n1 in 2usize..60, n2 in 2usize..60,
            m1 in -50.0f64..50.0, m2 in -50.0f64..50.0,
            s1 in 0.01f64..20.0, s2 in 0.01f64..20.0,
        ) {
            let (g1, g2) = (GroupSummary::new(n1, m1, s1), GroupSummary::new(n2, m2, s2));
            let t = t_test_summary(g1, g2).unwrap();
            let f = one_way_anova_summary(g1, g2).unwrap();
            prop_assert!((f.statistic - t.statistic * t.statistic).abs() <= 1e-6 * f.statistic.max(1.0));
            prop_assert!((0.0..=1.0).contains(&t.p) && (0.0..=1.0).contains(&f.p));
            prop_assert!((t.p - f.p).abs() < 1e-6);
            prop_assert_eq!(t.df[0], (n1 + n2 - 2) as f64);
        }
    }
}
