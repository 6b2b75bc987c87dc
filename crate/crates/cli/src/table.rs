use mineral_pomdp::ProblemConfig;

fn money(v: f64) -> String {
    if v != 0.0 && v.abs() < 0.01 {
        format!("{} $", v * 1e6)
    } else {
        format!("{v} $M")
    }
}

fn list<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    format!("[{}]", items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "))
}

/// Resolved parameters as `(parameter, symbol, value)` rows.
pub fn parameter_rows(c: &ProblemConfig) -> Vec<(String, String, String)> {
    let n = c.n_sites();
    let dom: Vec<usize> = c.domestic_sites().map(|j| j + 1).collect();
    let fgn: Vec<usize> = c.foreign_sites().map(|j| j + 1).collect();
    let mut rows: Vec<(String, String, String)> = Vec::new();
    let mut row = |p: &str, s: &str, v: String| rows.push((p.into(), s.into(), v));
    row(
        "Number of sites",
        "n",
        format!("{n} ({} domestic, {} foreign)", dom.len(), fgn.len()),
    );
    row("Domestic sites", "J_d", format!("{{{}}}", list(&dom).trim_matches(['[', ']'])));
    row("Foreign sites", "J_f", format!("{{{}}}", list(&fgn).trim_matches(['[', ']'])));
    row("Reserve discretization", "-", format!("{} intervals", c.reserve_bin));
    row("Observation bin", "-", c.obs_bin.to_string());
    row(
        "Observation cap",
        "-",
        c.obs_cap.map_or("none".into(), |v| v.to_string()),
    );
    row("Observation noise", "sigma_o", c.obs_noise.to_string());
    row("Exploration cost", "c_e", money(c.costs.explore));
    row("Build cost", "c_b", money(c.costs.build));
    row("Restoration cost", "c_r", money(c.costs.restore));
    row("Operating cost", "c_o", money(c.costs.operating));
    row(
        "Transportation cost",
        "c_t",
        format!("{} per unit", list(c.sites.iter().map(|s| money(s.transport_cost)))),
    );
    row("Processing cost", "c_p", format!("{} per unit", money(c.costs.processing)));
    row("Lithium price (processed)", "p_Li", format!("{} per unit", money(c.costs.lithium_price)));
    row("Discount factor", "gamma", c.discount.to_string());
    row("Planning horizon", "T", format!("{} years", c.horizon));
    row("Extraction factor", "rho", c.extraction_factor.to_string());
    row("Domestic mining delay goal", "t_d", format!("{} years", c.delay_goal));
    row("Domestic mining penalty", "p_d", money(c.costs.domestic_penalty));
    row("Initial reserves", "v", list(c.reserves()));
    row("Prior mean", "mu0", list(c.prior_mean()));
    row("Prior std", "sigma0", list(c.prior_std()));
    for (j, s) in c.sites.iter().enumerate() {
        row(&format!("Annual mine yield, {}", s.name), &format!("phi_{}", j + 1), s.yield_dist.to_string());
    }
    for (j, s) in c.sites.iter().enumerate() {
        let used = if c.has_loss(j) { "" } else { " (unused)" };
        row(
            &format!("Annual transportation loss, {}", s.name),
            &format!("psi_{}", j + 1),
            format!("{}{used}", s.loss),
        );
    }
    row("CO2 emission factor", "e", list(c.sites.iter().map(|s| s.emission_factor)));
    row("Restoration absorption", "r", list(c.sites.iter().map(|s| s.restore_absorption)));
    row("Emission scale", "-", c.emission_scale.to_string());
    row("Objective function weights", "w", list(c.weights));
    for band in &c.demand {
        row(
            &format!("Demand year {}-{}", band.from_year, band.to_year),
            &format!("d_{}..d_{}", band.from_year, band.to_year),
            band.dist.to_string(),
        );
    }
    rows
}

pub fn render(rows: &[(String, String, String)]) -> String {
    let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max("Parameter".len());
    let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0).max("Symbol".len());
    let mut out = format!("{:w0$}  {:w1$}  Value\n", "Parameter", "Symbol");
    out.push_str(&format!("{}  {}  {}\n", "-".repeat(w0), "-".repeat(w1), "-----"));
    for (p, s, v) in rows {
        out.push_str(&format!("{p:w0$}  {s:w1$}  {v}\n"));
    }
    out
}
