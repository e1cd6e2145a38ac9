use serde::{Deserialize, Serialize};

use super::WorkerRecord;

/// Weighted means for one arm and period. `None` when no record falls in
/// the relevant subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub treated: bool,
    pub post: bool,
    pub observations: usize,
    pub employment: Option<f64>,
    pub formal: Option<f64>,
    pub informal: Option<f64>,
    /// Share with a long-term contract among formal workers.
    pub ltc_conditional: Option<f64>,
    /// Share with a long-term contract among everyone.
    pub ltc_unconditional: Option<f64>,
    pub tenure_employed: Option<f64>,
    pub tenure_formal: Option<f64>,
    pub tenure_informal: Option<f64>,
    pub tenure_stc: Option<f64>,
    pub tenure_ltc: Option<f64>,
    /// Years since the last job, among the non-employed.
    pub nonemp_spell_years: Option<f64>,
    /// Monthly earnings among formal workers.
    pub formal_earnings: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSummary {
    /// Ordered control-pre, control-post, treated-pre, treated-post; empty
    /// cells are left out.
    pub rows: Vec<SummaryRow>,
}

fn wmean<'a>(rs: impl Iterator<Item = &'a WorkerRecord>, f: impl Fn(&WorkerRecord) -> f64) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for r in rs {
        num += r.household_weight * f(r);
        den += r.household_weight;
    }
    (den > 0.0).then(|| num / den)
}

fn row(treated: bool, post: bool, rs: &[&WorkerRecord]) -> SummaryRow {
    let all = || rs.iter().copied();
    let formal = || all().filter(|r| r.formal == 1);
    let tenure = |r: &WorkerRecord| r.tenure_months as f64;
    SummaryRow {
        treated,
        post,
        observations: rs.len(),
        employment: wmean(all(), |r| r.employed as f64),
        formal: wmean(all(), |r| r.formal as f64),
        informal: wmean(all(), |r| r.informal as f64),
        ltc_conditional: wmean(formal(), |r| r.ltc_conditional.unwrap_or(0) as f64),
        ltc_unconditional: wmean(all(), |r| r.ltc_conditional.unwrap_or(0) as f64),
        tenure_employed: wmean(all().filter(|r| r.employed == 1), tenure),
        tenure_formal: wmean(formal(), tenure),
        tenure_informal: wmean(all().filter(|r| r.informal == 1), tenure),
        tenure_stc: wmean(all().filter(|r| r.ltc_conditional == Some(0)), tenure),
        tenure_ltc: wmean(all().filter(|r| r.ltc_conditional == Some(1)), tenure),
        nonemp_spell_years: wmean(all().filter(|r| r.employed == 0), |r| r.nonemp_spell_years),
        formal_earnings: wmean(formal(), |r| r.monthly_wage),
    }
}

/// Household-weighted outcome means by arm and period.
pub fn panel_summary(records: &[WorkerRecord]) -> PanelSummary {
    let mut rows = Vec::new();
    for treated in [false, true] {
        for post in [false, true] {
            let cell: Vec<&WorkerRecord> = records
                .iter()
                .filter(|r| r.is_treated() == treated && r.is_post() == post)
                .collect();
            if !cell.is_empty() {
                rows.push(row(treated, post, &cell));
            }
        }
    }
    PanelSummary { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rec(employed: u8, formal: u8, ltc: Option<u8>, tenure: u8, spell: f64, wage: f64, weight: f64) -> WorkerRecord {
        WorkerRecord {
            worker_id: 0,
            country_id: 1,
            household_id: 0,
            survey_wave: 1,
            event_month: 2,
            household_weight: weight,
            employed,
            formal,
            informal: employed - formal,
            ltc_conditional: ltc,
            tenure_months: tenure,
            nonemp_spell_years: spell,
            monthly_wage: wage,
            urban: 0,
            age: 40,
            female: 1,
            education: 6,
            household_size: 4,
            married: 1,
        }
    }

    #[test]
    fn four_record_hand_means() {
        let rs = vec![
            rec(1, 1, Some(1), 12, 0.0, 300.0, 1.0),
            rec(1, 1, Some(0), 4, 0.0, 100.0, 3.0),
            rec(1, 0, None, 6, 0.0, 0.0, 2.0),
            rec(0, 0, None, 0, 1.5, 0.0, 2.0),
        ];
        let s = panel_summary(&rs);
        assert_eq!(s.rows.len(), 1);
        let r = &s.rows[0];
        assert!(r.treated && r.post);
        assert_relative_eq!(r.employment.unwrap(), 6.0 / 8.0);
        assert_relative_eq!(r.formal.unwrap(), 4.0 / 8.0);
        assert_relative_eq!(r.informal.unwrap(), 2.0 / 8.0);
        assert_relative_eq!(r.ltc_conditional.unwrap(), 1.0 / 4.0);
        assert_relative_eq!(r.ltc_unconditional.unwrap(), 1.0 / 8.0);
        assert_relative_eq!(r.tenure_employed.unwrap(), (12.0 + 12.0 + 12.0) / 6.0);
        assert_relative_eq!(r.tenure_formal.unwrap(), (12.0 + 12.0) / 4.0);
        assert_relative_eq!(r.tenure_informal.unwrap(), 6.0);
        assert_relative_eq!(r.tenure_stc.unwrap(), 4.0);
        assert_relative_eq!(r.tenure_ltc.unwrap(), 12.0);
        assert_relative_eq!(r.nonemp_spell_years.unwrap(), 1.5);
        assert_relative_eq!(r.formal_earnings.unwrap(), (300.0 + 300.0) / 4.0);
    }

    #[test]
    fn empty_subgroups_are_none() {
        let rs = vec![rec(0, 0, None, 0, 0.5, 0.0, 1.0)];
        let r = &panel_summary(&rs).rows[0];
        assert_eq!(r.formal_earnings, None);
        assert_eq!(r.tenure_employed, None);
        assert_relative_eq!(r.employment.unwrap(), 0.0);
    }
}
