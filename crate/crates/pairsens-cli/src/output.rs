use pairsens::{
    AttributableResult, Calibration, ContingencyTable2x2, GammaSens, Method, OrderingReport,
    SimulationReport, StopReason,
};
use serde::Serialize;

pub fn method_name(method: Method) -> &'static str {
    match method {
        Method::Exact => "exact",
        Method::Normal {
            continuity_correction: false,
        } => "normal",
        Method::Normal {
            continuity_correction: true,
        } => "normal+cc",
    }
}

pub fn calibration_name(calibration: Calibration) -> &'static str {
    match calibration {
        Calibration::WorstCase => "worst_case",
        Calibration::AverageCase => "average_case",
    }
}

fn stop_name(stop: StopReason) -> &'static str {
    match stop {
        StopReason::DeviateBelowCritical => "deviate_below_critical",
        StopReason::DegenerateTrimmedMean => "degenerate_trimmed_mean",
        StopReason::CapReached => "cap_reached",
    }
}

fn gamma_sens_cell(g: &GammaSens, decimals: usize) -> String {
    match g {
        GammaSens::Value(v) => format!("{v:.decimals$}"),
        GammaSens::NotSignificantAtGammaOne => "not-significant".into(),
        GammaSens::InsensitiveUpToCap => "insensitive-at-cap".into(),
    }
}

fn option_gamma_cell(g: Option<f64>) -> String {
    match g {
        Some(v) => format!("{v:.2}"),
        None => "-".into(),
    }
}

fn label_width<'a>(labels: impl Iterator<Item = &'a str>) -> usize {
    labels.map(str::len).chain(std::iter::once(5)).max().unwrap()
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}

#[derive(Serialize)]
pub struct McnemarRow {
    pub label: String,
    #[serde(flatten)]
    pub table: ContingencyTable2x2,
    pub s: u64,
    pub t: u64,
    pub p_value_lower: f64,
    pub p_value_upper: f64,
    pub significant_at_alpha: bool,
}

#[derive(Serialize)]
pub struct McnemarReport {
    pub gamma: f64,
    pub calibration: Calibration,
    pub alpha: f64,
    pub method: Method,
    pub studies: Vec<McnemarRow>,
}

pub fn mcnemar_table(r: &McnemarReport) -> String {
    let w = label_width(r.studies.iter().map(|s| s.label.as_str()));
    let mut out = format!(
        "p-value bounds at gamma = {} ({}), alpha = {}, method = {}\n",
        r.gamma,
        calibration_name(r.calibration),
        r.alpha,
        method_name(r.method)
    );
    out += &format!(
        "{:<w$}  {:>5}  {:>5}  {:>9}  {:>9}  significant\n",
        "label", "s", "t", "p_lower", "p_upper"
    );
    for row in &r.studies {
        out += &format!(
            "{:<w$}  {:>5}  {:>5}  {:>9.6}  {:>9.6}  {}\n",
            row.label,
            row.s,
            row.t,
            row.p_value_lower,
            row.p_value_upper,
            if row.significant_at_alpha { "yes" } else { "no" }
        );
    }
    out
}

#[derive(Serialize)]
pub struct TrimmedSearch {
    pub beta: f64,
    pub s: u64,
    pub t: u64,
    pub gamma_sens: GammaSens,
}

#[derive(Serialize)]
pub struct GammaSearchRow {
    pub label: String,
    #[serde(flatten)]
    pub table: ContingencyTable2x2,
    pub s: u64,
    pub t: u64,
    pub gamma_sens: GammaSens,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trimmed: Option<TrimmedSearch>,
}

#[derive(Serialize)]
pub struct GammaSearchReport {
    pub alpha: f64,
    pub method: Method,
    pub tol: f64,
    pub studies: Vec<GammaSearchRow>,
}

pub fn gamma_search_table(r: &GammaSearchReport) -> String {
    let w = label_width(r.studies.iter().map(|s| s.label.as_str()));
    let trimmed = r.studies.iter().any(|s| s.trimmed.is_some());
    let mut out = format!(
        "largest gamma preserving significance: alpha = {}, method = {}, tol = {}\n",
        r.alpha,
        method_name(r.method),
        r.tol
    );
    out += &format!("{:<w$}  {:>5}  {:>5}  {:>12}", "label", "s", "t", "gamma_sens");
    if trimmed {
        out += &format!("  {:>6}  {:>6}  {:>15}", "s_trim", "t_trim", "gamma_sens_trim");
    }
    out += "\n";
    for row in &r.studies {
        out += &format!(
            "{:<w$}  {:>5}  {:>5}  {:>12}",
            row.label,
            row.s,
            row.t,
            gamma_sens_cell(&row.gamma_sens, 4)
        );
        if let Some(t) = &row.trimmed {
            out += &format!(
                "  {:>6}  {:>6}  {:>15}",
                t.s,
                t.t,
                gamma_sens_cell(&t.gamma_sens, 4)
            );
        }
        out += "\n";
    }
    out
}

#[derive(Serialize)]
pub struct AttributableRow {
    pub label: String,
    #[serde(flatten)]
    pub table: ContingencyTable2x2,
    pub s: u64,
    pub t: u64,
    #[serde(flatten)]
    pub result: AttributableResult,
}

#[derive(Serialize)]
pub struct AttributableReport {
    pub gamma: f64,
    pub calibration: Calibration,
    pub alpha: f64,
    pub p_min: f64,
    pub studies: Vec<AttributableRow>,
}

pub fn attributable_table(r: &AttributableReport) -> String {
    let w = label_width(r.studies.iter().map(|s| s.label.as_str()));
    let mut out = format!(
        "attributable events: gamma = {} ({}), alpha = {}, p_min = {}\n",
        r.gamma,
        calibration_name(r.calibration),
        r.alpha,
        r.p_min
    );
    out += &format!(
        "{:<w$}  {:>5}  {:>5}  {:>12}  {:>11}  {:>13}  stop\n",
        "label", "s", "t", "a_lower_incl", "a_star_excl", "implied_gamma"
    );
    for row in &r.studies {
        out += &format!(
            "{:<w$}  {:>5}  {:>5}  {:>12}  {:>11}  {:>13}  {}\n",
            row.label,
            row.s,
            row.t,
            row.result.a_lower_inclusive,
            row.result.a_star_exclusive,
            option_gamma_cell(row.result.implied_worst_case_gamma),
            stop_name(row.result.stop)
        );
    }
    out += "\na_lower_incl is the one-sided lower confidence bound (inclusive): A >= a_lower_incl.\n";
    for row in &r.studies {
        let a = row.result.a_lower_inclusive;
        if a == 0 {
            out += &format!(
                "{}: no events need be attributable at this level (A >= 0)\n",
                row.label
            );
        } else {
            let mut line = format!(
                "{}: at least {} of the {} hazard-window events attributable (A >= {}; counts up to {} rejected)",
                row.label, a, row.t, a, row.result.a_star_exclusive
            );
            if let Some(g) = row.result.implied_worst_case_gamma {
                line += &format!("; implied worst-case gamma {g:.2}");
            }
            out += &line;
            out += "\n";
        }
    }
    out
}

#[derive(Serialize)]
pub struct CalibrateReport {
    pub rho: f64,
    pub p_driving: f64,
    pub p_not_driving: f64,
    pub p_bar: f64,
    pub gamma_prime: f64,
}

pub fn calibrate_table(r: &CalibrateReport) -> String {
    format!(
        "intermittency calibration\nrho = {}, p_driving = {}, p_not_driving = {}\np_bar = {}\ngamma_prime = {:.6}\n",
        r.rho, r.p_driving, r.p_not_driving, r.p_bar, r.gamma_prime
    )
}

#[derive(Serialize)]
pub struct TailOrderingOutput {
    pub passed: bool,
    pub s: u64,
    pub p_bar: f64,
    #[serde(flatten)]
    pub report: OrderingReport,
}

pub fn tail_ordering_table(o: &TailOrderingOutput) -> String {
    let mut out = format!(
        "mean-binomial tail ordering: s = {}, p_bar = {:.6}\nnote: {}\n",
        o.s, o.p_bar, o.report.domain_note
    );
    out += &format!("{:>4}  {:>16}  {:>16}  holds\n", "a", "exact_tail", "binomial_tail");
    for rec in &o.report.records {
        out += &format!(
            "{:>4}  {:>16.12}  {:>16.12}  {}\n",
            rec.a,
            rec.lhs_tail,
            rec.rhs_tail,
            if rec.holds { "yes" } else { "no" }
        );
    }
    out += &format!(
        "result: {} (guaranteed domain a >= {})\n",
        if o.passed { "PASS" } else { "FAIL" },
        o.report.guaranteed_from
    );
    out
}

#[derive(Serialize)]
pub struct SandwichOutput {
    pub passed: bool,
    pub s: u64,
    pub gamma: f64,
    #[serde(flatten)]
    pub report: OrderingReport,
}

pub fn sandwich_table(o: &SandwichOutput) -> String {
    let mut out = format!(
        "binomial sandwich: s = {}, gamma = {}\nnote: {}\n",
        o.s, o.gamma, o.report.domain_note
    );
    out += &format!(
        "{:>4}  {:<14}  {:>16}  {:>16}  holds\n",
        "a", "claim", "lhs", "rhs"
    );
    for (i, rec) in o.report.records.iter().enumerate() {
        let claim = if i % 2 == 0 { "lower <= exact" } else { "exact <= upper" };
        out += &format!(
            "{:>4}  {:<14}  {:>16.12}  {:>16.12}  {}\n",
            rec.a,
            claim,
            rec.lhs_tail,
            rec.rhs_tail,
            if rec.holds { "yes" } else { "no" }
        );
    }
    out += &format!("result: {}\n", if o.passed { "PASS" } else { "FAIL" });
    out
}

#[derive(Serialize)]
pub struct SimulateOutput {
    pub passed: bool,
    pub gamma_log: f64,
    pub se_multiplier: f64,
    #[serde(flatten)]
    pub report: SimulationReport,
}

pub fn simulate_table(o: &SimulateOutput) -> String {
    let mut out = format!(
        "monte carlo tails: gamma_log = {:.6}, reps = {}, seed = {}\n",
        o.gamma_log, o.report.reps, o.report.seed
    );
    out += &format!(
        "{:>9}  {:>10}  {:>10}  {:>10}  {:>10}  {:>7}\n",
        "threshold", "hits", "empirical", "exact", "std_error", "z"
    );
    for row in &o.report.rows {
        let z = if row.std_error > 0.0 {
            format!("{:.2}", (row.empirical - row.exact) / row.std_error)
        } else if row.empirical == row.exact {
            "0.00".into()
        } else {
            "inf".into()
        };
        out += &format!(
            "{:>9}  {:>10}  {:>10.6}  {:>10.6}  {:>10.6}  {:>7}\n",
            row.threshold, row.hits, row.empirical, row.exact, row.std_error, z
        );
    }
    out += &format!(
        "result: {} (band {} standard errors)\n",
        if o.passed { "PASS" } else { "FAIL" },
        o.se_multiplier
    );
    out
}

#[derive(Serialize)]
pub struct FullReportRow {
    pub label: String,
    #[serde(flatten)]
    pub table: ContingencyTable2x2,
    pub s: u64,
    pub t: u64,
    pub gamma_sens_exact: GammaSens,
    pub gamma_sens_normal: GammaSens,
    pub a_lower_inclusive: u64,
    pub a_star_exclusive: i64,
    pub implied_worst_case_gamma: Option<f64>,
}

#[derive(Serialize)]
pub struct FullReport {
    pub alpha: f64,
    pub gamma_prime: f64,
    pub p_min: f64,
    pub studies: Vec<FullReportRow>,
}

pub fn full_report_table(r: &FullReport) -> String {
    let w = label_width(r.studies.iter().map(|s| s.label.as_str()));
    let mut out = format!("sensitivity report: alpha = {}\n\n", r.alpha);
    out += "largest gamma preserving significance, by hazard window\n";
    out += &format!("{:<w$}  {:>5}  {:>5}  {:>6}  {:>6}\n", "label", "s", "t", "exact", "normal");
    for row in &r.studies {
        out += &format!(
            "{:<w$}  {:>5}  {:>5}  {:>6}  {:>6}\n",
            row.label,
            row.s,
            row.t,
            gamma_sens_cell(&row.gamma_sens_exact, 2),
            gamma_sens_cell(&row.gamma_sens_normal, 2)
        );
    }
    out += &format!(
        "\nattributable events at average-case gamma' = {}, p_min = {}\n",
        r.gamma_prime, r.p_min
    );
    out += &format!(
        "{:<w$}  {:>5}  {:>12}  {:>11}  {:>13}\n",
        "label", "t", "a_lower_incl", "a_star_excl", "implied_gamma"
    );
    for row in &r.studies {
        out += &format!(
            "{:<w$}  {:>5}  {:>12}  {:>11}  {:>13}\n",
            row.label,
            row.t,
            row.a_lower_inclusive,
            row.a_star_exclusive,
            option_gamma_cell(row.implied_worst_case_gamma)
        );
    }
    out
}
