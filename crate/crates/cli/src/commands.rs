use std::fmt::Write as _;
use std::time::Instant;

use oddcf::alpha::parse_real;
use oddcf::cylinders::{self, CylinderRecord};
use oddcf::digits::{self, SignedDigit};
use oddcf::interval::{decimal, decimal17};
use oddcf::measures::{self, DensityProfile};
use oddcf::natext;
use oddcf::verify::{self, VerifyConfig};
use oddcf::{AlphaParam, CfError, Result};
use rug::{Float, Rational};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;

/// What a command produced: the text to emit, and a failure message when
/// the command ran but a check did not hold.
pub struct Output {
    pub text: String,
    pub failure: Option<String>,
}

impl Output {
    fn ok(text: String) -> Self {
        Output { text, failure: None }
    }
}

#[derive(Serialize)]
struct Provenance {
    version: &'static str,
    precision_bits: u32,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seconds: Option<f64>,
}

pub fn version() -> &'static str {
    option_env!("ODDCF_GIT_DESCRIBE").unwrap_or(concat!("v", env!("CARGO_PKG_VERSION")))
}

struct Ctx<'a> {
    common: &'a Common,
    start: Instant,
}

impl Ctx<'_> {
    fn prec(&self) -> u32 {
        self.common.precision
    }

    fn format(&self, default: Format) -> Format {
        self.common.format.unwrap_or(default)
    }

    fn alpha(&self, a: &AlphaArg) -> Result<AlphaParam> {
        AlphaParam::parse(&a.alpha, self.prec(), false)
    }

    /// `{"command", "provenance", ...body}` as pretty JSON.
    fn json(&self, command: &str, body: Value) -> String {
        let prov = Provenance {
            version: version(),
            precision_bits: self.prec(),
            seed: self.common.seed,
            seconds: self.common.timings.then(|| self.start.elapsed().as_secs_f64()),
        };
        let mut doc = json!({ "command": command, "provenance": prov });
        if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
            d.extend(b);
        }
        let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
        s.push('\n');
        s
    }
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn usage(input: &str, reason: impl Into<String>) -> CfError {
    CfError::Parse {
        input: input.into(),
        reason: reason.into(),
    }
}

pub fn run(cli: &Cli) -> Result<Output> {
    let ctx = Ctx {
        common: &cli.common,
        start: Instant::now(),
    };
    match &cli.command {
        Command::Expand(a) => expand(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Orbit(a) => orbit(&ctx, a),
        Command::Density(a) => density(&ctx, a),
        Command::Entropy(a) => entropy(&ctx, a),
        Command::Cylinders(a) => cylinder_dump(&ctx, a),
        Command::Verify(a) => run_verify(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
    }
}

/// x as a float and, when known, as an exact rational.
fn parse_x(token: &str, alpha: &AlphaParam) -> Result<(Float, Option<Rational>)> {
    let exact_alpha = digits::exact_alpha(alpha);
    match token.trim() {
        "alpha" => Ok((alpha.value().clone(), exact_alpha)),
        "alpha-2" => Ok((alpha.left(), exact_alpha.map(|a| a - 2u32))),
        t => parse_real(t, alpha.prec()),
    }
}

fn expand(ctx: &Ctx, a: &ExpandArgs) -> Result<Output> {
    let alpha = ctx.alpha(&a.alpha)?;
    let (x, exact) = parse_x(&a.x, &alpha)?;
    let exp = match &exact {
        Some(r) => digits::expand_rational(r, &alpha, a.n)?,
        None => digits::expand(&x, &alpha, a.n)?,
    };
    let xr = exp.x0_rational();
    let convs = exp.convergents();
    let prec = alpha.prec();
    // |x − p_n/q_n| for n = 1..len, exactly then rounded
    let errors: Vec<Float> = convs
        .iter()
        .skip(2)
        .map(|c| Float::with_val(prec, Rational::from(&xr - Rational::from((c.p.clone(), c.q.clone()))).abs()))
        .collect();
    let constraints = digits::validate_constraints(&exp);
    let text = match ctx.format(Format::Json) {
        Format::Csv => csv(
            "n,e,d,p,q,error",
            exp.digits.iter().enumerate().map(|(i, d)| {
                let c = &convs[i + 2];
                format!("{},{},{},{},{},{}", i + 1, d.e(), d.d(), c.p, c.q, decimal17(&errors[i]))
            }),
        ),
        _ => {
            let convergents: Vec<digits::ConvergentRecord> = convs.iter().map(Into::into).collect();
            let errs: Vec<Value> = errors
                .iter()
                .enumerate()
                .map(|(i, e)| json!({ "n": i + 1, "error": decimal(e) }))
                .collect();
            ctx.json(
                "expand",
                json!({
                    "expansion": exp.record(),
                    "near_ties": exp.near_ties,
                    "convergents": convergents,
                    "errors": errs,
                    "constraints": constraints,
                }),
            )
        }
    };
    Ok(Output::ok(text))
}

fn parse_digits(s: &str) -> Result<Vec<SignedDigit>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let w: i64 = t.trim().parse().map_err(|_| usage(t, "not an integer digit"))?;
            SignedDigit::from_omega(w)
        })
        .collect()
}

fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<Output> {
    let ds = parse_digits(&a.digits)?;
    if ds.is_empty() {
        return Err(usage(&a.digits, "no digits"));
    }
    let tail = a.tail.as_deref().map(|t| parse_real(t, ctx.prec())).transpose()?;
    let value = digits::evaluate(&ds, tail.as_ref().map(|t| &t.0), ctx.prec())?;
    let exact = match &tail {
        None => Some(digits::evaluate_exact(&ds)?),
        Some((_, Some(t))) => {
            let s = digits::ConvergentPair::from_digits(&ds);
            let den = Rational::from(t * &s.q_prev) + &s.q;
            (den != 0).then(|| (Rational::from(t * &s.p_prev) + &s.p) / den)
        }
        Some((_, None)) => None,
    };
    let exact_s = exact.map(|r| r.to_string());
    let text = match ctx.format(Format::Json) {
        Format::Csv => csv("value,exact", [format!("{},{}", decimal17(&value), exact_s.unwrap_or_default())]),
        _ => ctx.json(
            "eval",
            json!({
                "digits": ds.iter().map(|d| d.omega()).collect::<Vec<_>>(),
                "tail": a.tail,
                "value": decimal(&value),
                "exact": exact_s,
            }),
        ),
    };
    Ok(Output::ok(text))
}

fn orbit(ctx: &Ctx, a: &OrbitArgs) -> Result<Output> {
    let alpha = AlphaParam::parse(&a.alpha.alpha, ctx.prec(), true)?;
    if a.grid == 0 {
        return Err(usage("--grid 0", "the mesh needs at least one point"));
    }
    let cloud = natext::orbit_cloud(&alpha, a.grid, a.n)?;
    let mut failure = None;
    let mut escape = None;
    if a.check_domain {
        if alpha.branch().is_exploratory() {
            eprintln!("note: alpha = {} lies outside [g, G]; --check-domain does not apply", alpha.label());
        } else {
            let f = natext::escape_fraction(&cloud, &natext::omega_domain(&alpha)?);
            escape = Some(f);
            if f > 0.0 {
                failure = Some(format!("{:.6} of the orbit cloud lies outside Omega_{}", f, alpha.label()));
            }
        }
    }
    let text = match ctx.format(Format::Csv) {
        Format::Json => {
            let points: Vec<[Value; 3]> = cloud
                .iter()
                .map(|c| [json!(c.k), json!(decimal17(&c.pt.x)), json!(decimal17(&c.pt.y))])
                .collect();
            ctx.json(
                "orbit",
                json!({
                    "alpha": alpha.label(),
                    "branch": alpha.branch(),
                    "grid": a.grid,
                    "n": a.n,
                    "escape_fraction": escape,
                    "points": points,
                }),
            )
        }
        _ => {
            let mut s = String::with_capacity(cloud.len() * 40);
            s.push_str("k,x,y\n");
            for c in &cloud {
                let _ = writeln!(s, "{},{},{}", c.k, decimal17(&c.pt.x), decimal17(&c.pt.y));
            }
            s
        }
    };
    Ok(Output { text, failure })
}

fn density(ctx: &Ctx, a: &DensityArgs) -> Result<Output> {
    let alpha = ctx.alpha(&a.alpha)?;
    let prof = DensityProfile::new(&alpha)?;
    let prec = alpha.prec();
    let xs: Vec<Float> = if a.at.is_empty() {
        let m = a.mesh.max(1);
        (0..m)
            .map(|j| Float::with_val(prec, (2 * j + 1) as f64) / m as f64 + alpha.left())
            .collect()
    } else {
        a.at.iter().map(|t| parse_real(t, prec).map(|v| v.0)).collect::<Result<_>>()?
    };
    let values = xs
        .iter()
        .map(|x| Ok((x.clone(), prof.eval(x)?)))
        .collect::<Result<Vec<_>>>()?;
    let text = match ctx.format(Format::Json) {
        Format::Csv => csv("x,h", values.iter().map(|(x, h)| format!("{},{}", decimal17(x), decimal17(h)))),
        _ => ctx.json(
            "density",
            json!({
                "alpha": alpha.label(),
                "normalizer": decimal(&prof.normalizer),
                "breakpoints": prof.breakpoints.iter().map(decimal).collect::<Vec<_>>(),
                "values": values.iter().map(|(x, h)| json!({ "x": decimal(x), "h": decimal(h) })).collect::<Vec<_>>(),
            }),
        ),
    };
    Ok(Output::ok(text))
}

fn entropy(ctx: &Ctx, a: &EntropyArgs) -> Result<Output> {
    let alpha = ctx.alpha(&a.alpha)?;
    if a.n == 0 || a.trials == 0 {
        return Err(usage("--n/--trials", "must be positive"));
    }
    let r = measures::entropy_estimate(&alpha, a.n, a.trials, ctx.common.seed)?;
    let target = measures::entropy_target(&alpha);
    let text = match ctx.format(Format::Json) {
        Format::Csv => csv(
            "quantity,estimate,std_error,target",
            [
                ("entropy", &r.entropy, target),
                ("levy", &r.levy, target / 2.0),
                ("birkhoff", &r.birkhoff, target / 2.0),
                ("residual_exponent", &r.residual_exponent, -target / 2.0),
                ("approximation_exponent", &r.approximation_exponent, -target),
            ]
            .into_iter()
            .map(|(q, e, t)| format!("{q},{:e},{:e},{:e}", e.estimate, e.std_error, t)),
        ),
        _ => ctx.json(
            "entropy",
            json!({
                "report": r,
                "target": target,
                "relative_error": r.entropy.relative_error(target),
            }),
        ),
    };
    Ok(Output::ok(text))
}

fn cylinder_dump(ctx: &Ctx, a: &CylinderArgs) -> Result<Output> {
    let alpha = ctx.alpha(&a.alpha)?;
    if a.rank == 0 || a.d_max == 0 || a.d_max % 2 == 0 {
        return Err(usage("--rank/--d-max", "rank must be positive and d-max odd"));
    }
    let e = cylinders::enumerate_rank(&alpha, a.rank, a.d_max, a.budget)?;
    let records: Vec<CylinderRecord> = e
        .cylinders
        .iter()
        .filter(|c| c.is_nonempty())
        .map(|c| c.record(&alpha))
        .collect();
    if e.indeterminate > 0 {
        eprintln!("note: {} cylinders narrower than the guard band were left out", e.indeterminate);
    }
    let text = match ctx.format(Format::Jsonl) {
        Format::Json => ctx.json(
            "cylinders",
            json!({
                "alpha": alpha.label(),
                "rank": a.rank,
                "d_max": a.d_max,
                "indeterminate": e.indeterminate,
                "tail_length": decimal(&e.tail_length),
                "total_length": decimal(&e.total_length()),
                "cylinders": records,
            }),
        ),
        Format::Csv => csv(
            "word,delta_lo,delta_hi,image_lo,image_hi,p,q,full",
            records.iter().map(|r| {
                let word = r.word.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
                format!("{word},{},{},{},{},{},{},{}", r.delta[0], r.delta[1], r.image[0], r.image[1], r.p, r.q, r.full)
            }),
        ),
        Format::Jsonl => {
            let mut s = String::new();
            for r in &records {
                s.push_str(&serde_json::to_string(r).expect("serializable"));
                s.push('\n');
            }
            s
        }
    };
    Ok(Output::ok(text))
}

fn run_verify(ctx: &Ctx, a: &VerifyArgs) -> Result<Output> {
    if a.list {
        return Ok(Output::ok(verify::id::ALL.iter().map(|i| format!("{i}\n")).collect()));
    }
    let mut cfg = VerifyConfig {
        precision_bits: ctx.prec(),
        seed: ctx.common.seed,
        only: a.only.clone(),
        ..VerifyConfig::default()
    };
    if let Some(g) = a.grid {
        if g < 2 {
            return Err(usage("--grid", "needs at least 2 points"));
        }
        cfg.grid_points = g;
    }
    if let Some(s) = a.samples {
        cfg.partition_samples = s;
        cfg.product_samples = s;
    }
    if let Some(e) = a.expansions {
        cfg.expansions = e;
    }
    if let Some(n) = a.n {
        cfg.entropy_n = n;
    }
    if let Some(t) = a.trials {
        cfg.entropy_trials = t;
    }
    let mut report = verify::run(&cfg)?;
    if !ctx.common.timings {
        report.strip_runtimes();
    }
    let failing = report.failing_ids();
    let failure = (!report.pass).then(|| format!("failing checks: {}", failing.join(", ")));
    let text = match ctx.format(Format::Json) {
        Format::Csv => csv(
            "check_id,alpha,quantity,value,target,tolerance,pass",
            report.checks.iter().map(|c| {
                format!(
                    "{},{},\"{}\",{:e},{:e},{:e},{}",
                    c.check_id, c.alpha, c.quantity, c.value, c.target, c.tolerance, c.pass
                )
            }),
        ),
        _ => ctx.json(
            "verify",
            json!({ "pass": report.pass, "failing": failing, "checks": report.checks }),
        ),
    };
    Ok(Output { text, failure })
}

#[derive(Serialize)]
struct SweepRow {
    alpha: String,
    value: String,
    branch: oddcf::Branch,
    mu_omega: f64,
    c_alpha: f64,
    j_integral: f64,
    h_inf: f64,
    h_sup: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    entropy: Option<measures::EstimatorResult>,
}

fn sweep(ctx: &Ctx, a: &SweepArgs) -> Result<Output> {
    if a.grid < 2 {
        return Err(usage("--grid", "needs at least 2 points"));
    }
    let rows = AlphaParam::grid_with_specials(a.grid, ctx.prec())
        .iter()
        .map(|alpha| {
            let eq = measures::equivalence_constant(std::slice::from_ref(alpha), 256)?;
            let entropy = if a.entropy_n > 0 {
                Some(measures::entropy_estimate(alpha, a.entropy_n, a.trials, ctx.common.seed)?.entropy)
            } else {
                None
            };
            Ok(SweepRow {
                alpha: alpha.label(),
                value: decimal17(alpha.value()),
                branch: alpha.branch(),
                mu_omega: natext::omega_domain(alpha)?.mu().to_f64(),
                c_alpha: natext::c_alpha_closed_form(alpha).to_f64(),
                j_integral: measures::j_integral_value(alpha, 1e-10)?,
                h_inf: eq.inf,
                h_sup: eq.sup,
                entropy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let text = match ctx.format(Format::Json) {
        Format::Csv => csv(
            "alpha,value,mu_omega,c_alpha,j_integral,h_inf,h_sup,entropy,entropy_std_error",
            rows.iter().map(|r| {
                let (e, se) = r
                    .entropy
                    .as_ref()
                    .map(|e| (format!("{:.17e}", e.estimate), format!("{:.3e}", e.std_error)))
                    .unwrap_or_default();
                format!(
                    "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{e},{se}",
                    r.alpha, r.value, r.mu_omega, r.c_alpha, r.j_integral, r.h_inf, r.h_sup
                )
            }),
        ),
        _ => ctx.json("sweep", json!({ "rows": rows })),
    };
    Ok(Output::ok(text))
}
