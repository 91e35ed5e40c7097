use crate::par;

use super::{run_fuzz, CheckerError, Report, Scenario};

/// Runs independent scenarios and returns their reports sorted by seed.
pub fn run_campaign(scenarios: Vec<Scenario>) -> Vec<(Scenario, Result<Report, CheckerError>)> {
    sorted(par::map(scenarios, |s| {
        let r = run_fuzz(&s);
        (s, r)
    }))
}

/// Same as [`run_campaign`] but always on the calling thread.
pub fn run_campaign_sequential(scenarios: Vec<Scenario>) -> Vec<(Scenario, Result<Report, CheckerError>)> {
    sorted(par::map_sequential(scenarios, |s| {
        let r = run_fuzz(&s);
        (s, r)
    }))
}

fn sorted(mut runs: Vec<(Scenario, Result<Report, CheckerError>)>) -> Vec<(Scenario, Result<Report, CheckerError>)> {
    runs.sort_by_key(|(s, _)| (s.seed, s.datatype, s.nodes));
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DatatypeKind;

    #[test]
    fn parallel_matches_sequential() {
        let scenarios: Vec<Scenario> =
            (0..12).rev().map(|seed| Scenario::new(DatatypeKind::Rga, 3, 15, seed)).collect();
        let a = run_campaign(scenarios.clone());
        let b = run_campaign_sequential(scenarios);
        assert_eq!(a.len(), b.len());
        for ((sa, ra), (sb, rb)) in a.iter().zip(&b) {
            assert_eq!(sa, sb);
            assert_eq!(ra.as_ref().unwrap(), rb.as_ref().unwrap());
        }
        assert!(a.windows(2).all(|w| w[0].0.seed <= w[1].0.seed));
    }
}
