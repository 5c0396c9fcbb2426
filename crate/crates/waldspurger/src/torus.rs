//! The local torus period integral I(Phi, Omega) as an exact finite sum
//! over coset representatives of F^* \ E^* modulo a verified invariance
//! depth, together with the vanishing sweep over diagonal translates, the
//! epsilon-dichotomy predicates, twisting reductions, averaged test-vector
//! certificates, and the float-backend decay experiment for unramified
//! principal series.
//!
//! Coset representatives (inert, depth m >= 1):
//!   {1 + b sqrt(D) : b in pi O / pi^m} u {a + sqrt(D) : a in O / pi^m},
//! (q+1) q^{m-1} points of equal weight. Ramified (depth m >= 0):
//!   {1 + b sqrt(D) : b in O / pi^m} u {a + sqrt(D) : a in pi O / pi^{m+1}},
//! 2 q^m points of equal weight. Weights sum to 1 = Vol(F^* \ E^*).
//!
//! The chosen depth is never assumed: the runner verifies that the
//! summand is stable under deeper lifts of every representative before
//! trusting the finite sum.

use crate::chars::{all_chars, norm_lift, MultChar, Side, UnitGroup};
use crate::cyclotomic::{Complex, CycValue, SqrtQValue};
use crate::error::{Error, Result};
use crate::padic::{
    conjugated_torus_matrix, legendre, pi_pow, rat_int, valp, ExtElem, ExtKind,
    LocalFieldParams, Mat2,
};
use crate::principal_series::PsDatum;
use crate::supercuspidal::{McEvaluator, ScDatum};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// The representation whose newform (or twisted newform) is being tested.
#[derive(Debug)]
pub enum Rep {
    Sc(ScDatum),
    Ps(PsDatum),
}

impl Rep {
    pub fn c_pi(&self) -> u32 {
        match self {
            Rep::Sc(sc) => sc.c_pi,
            Rep::Ps(ps) => ps.n,
        }
    }
    pub fn q(&self) -> u64 {
        match self {
            Rep::Sc(sc) => sc.q(),
            Rep::Ps(ps) => ps.q(),
        }
    }
    pub fn fgroup(&self) -> &Arc<UnitGroup> {
        match self {
            Rep::Sc(sc) => &sc.fgroup,
            Rep::Ps(ps) => &ps.fgroup,
        }
    }
}

/// Candidate test vector from the pool: a diagonal translate of the
/// newform (eta absent) or of a twisted newform 1_{eta, -d}.
#[derive(Clone, Debug)]
pub struct TestVectorSpec {
    pub eta: Option<MultChar>,
    pub d: i64,
}

impl TestVectorSpec {
    pub fn newform(d: i64) -> Self {
        TestVectorSpec { eta: None, d }
    }
    pub fn twisted(eta: MultChar, d: i64) -> Self {
        TestVectorSpec { eta: Some(eta), d }
    }
}

/// Coset representatives with the uniform weight.
#[derive(Clone, Debug)]
pub struct TorusMeasure {
    pub params: LocalFieldParams,
    pub depth: u32,
    pub reps: Vec<ExtElem>,
    pub weight: BigRational,
}

impl TorusMeasure {
    pub fn build(params: &LocalFieldParams, depth: u32) -> TorusMeasure {
        let p = params.p;
        let mut reps = Vec::new();
        match params.ext {
            ExtKind::Inert => {
                if depth == 0 {
                    reps.push(ExtElem::one());
                } else {
                    for t in 0..p.pow(depth - 1) {
                        reps.push(ExtElem::new(
                            BigRational::one(),
                            rat_int((t * p) as i64),
                        ));
                    }
                    for a in 0..p.pow(depth) {
                        reps.push(ExtElem::new(rat_int(a as i64), BigRational::one()));
                    }
                }
            }
            ExtKind::Ramified => {
                for b in 0..p.pow(depth) {
                    reps.push(ExtElem::new(BigRational::one(), rat_int(b as i64)));
                }
                for t in 0..p.pow(depth) {
                    reps.push(ExtElem::new(rat_int((t * p) as i64), BigRational::one()));
                }
            }
        }
        let weight = BigRational::new(BigInt::one(), BigInt::from(reps.len() as i64));
        TorusMeasure { params: *params, depth, reps, weight }
    }

    /// True if x lies in F^* (1 + pi_E^m O_E), the coset equivalence at
    /// depth m.
    pub fn equivalent_to_one(params: &LocalFieldParams, x: &ExtElem, m: u32) -> bool {
        let va = valp(params.p, &x.a);
        let vb = valp(params.p, &x.b);
        match (va, vb) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(va), Some(vb)) => match params.ext {
                ExtKind::Inert => vb - va >= m as i64,
                ExtKind::Ramified => 2 * vb + 1 - 2 * va >= m as i64,
            },
        }
    }
}

/// Verdict of one integral against its predicted value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Match,
    Vanish,
    Mismatch,
}

/// Result of one local integral evaluation.
#[derive(Clone, Debug)]
pub struct IntegralReport {
    pub coset_count: usize,
    pub depth: u32,
    pub value: SqrtQValue,
    pub value_float: Complex,
    pub predicted: Option<BigRational>,
    pub verdict: Verdict,
}

impl IntegralReport {
    fn assemble(value: SqrtQValue, value_float: Complex, predicted: Option<BigRational>, count: usize, depth: u32) -> Self {
        let verdict = match &predicted {
            Some(r) => {
                if value.radical.is_zero() && value.plain.eq_rational(r) {
                    Verdict::Match
                } else if value.is_zero() {
                    Verdict::Vanish
                } else {
                    Verdict::Mismatch
                }
            }
            None => {
                if value.is_zero() {
                    Verdict::Vanish
                } else {
                    Verdict::Match
                }
            }
        };
        IntegralReport { coset_count: count, depth, value, value_float, predicted, verdict }
    }

    /// Exact rational value when the integral is rational.
    pub fn rational(&self) -> Option<BigRational> {
        self.value.as_plain().and_then(|c| c.as_rational())
    }
}

/// Characters of O_E^* trivial on O_F^* with conductor <= max_level,
/// extended by value 1 on pi_E (the admissible Omega's).
pub fn omega_chars(egroup: &Arc<UnitGroup>, max_level: u32) -> Vec<MultChar> {
    let fsub = egroup.f_subgroup_gens();
    all_chars(egroup)
        .into_iter()
        .filter(|c| c.conductor() <= max_level)
        .filter(|c| c.trivial_on(&fsub))
        .collect()
}

/// Conductor of Omega measured in F-units of invariance depth: m such
/// that Omega is trivial on 1 + pi_E^{e m} O_E at least.
fn omega_depth_f_units(params: &LocalFieldParams, c_omega: u32) -> u32 {
    match params.ext {
        ExtKind::Inert => c_omega,
        ExtKind::Ramified => c_omega.div_ceil(2),
    }
}

/// Theoretical invariance depth (in the F-unit parametrization of the
/// measure) for the translate-by-pi^d matrix coefficient of a conductor-c
/// representation, joined with Omega's depth.
pub fn theoretical_depth(params: &LocalFieldParams, c_pi: u32, d: i64, c_omega: u32) -> u32 {
    let c = c_pi as i64;
    let from_phi = match params.ext {
        ExtKind::Inert => d.max(c - d).max(1),
        ExtKind::Ramified => d.max(c - d - 1).max(0),
    } as u32;
    from_phi.max(omega_depth_f_units(params, c_omega))
}

/// Evaluate the spec's matrix coefficient at the conjugated torus point.
fn phi_value(
    rep: &Rep,
    ev: &mut Option<McEvaluator<'_>>,
    spec: &TestVectorSpec,
    torus: &LocalFieldParams,
    e: &ExtElem,
) -> Result<SqrtQValue> {
    match rep {
        Rep::Sc(sc) => {
            let ev = ev.as_mut().expect("sc evaluator");
            let eta = match &spec.eta {
                Some(x) => x.clone(),
                None => MultChar::trivial(sc.fgroup.clone()),
            };
            // the torus lives in E (possibly different from E'): the
            // decomposition uses the torus parameters, the Kirillov data the
            // representation's own
            let v = phi_sc_on_torus(ev, &eta, torus, &e.a, &e.b, spec.d)?;
            Ok(SqrtQValue::from_plain(sc.q(), v))
        }
        Rep::Ps(ps) => {
            if spec.eta.is_some() {
                return Err(Error::InvalidParams(
                    "twisted newforms for principal series are reached through the twisting reduction".into(),
                ));
            }
            let g: Mat2 = conjugated_torus_matrix(torus, &e.a, &e.b, spec.d);
            ps.phi_g(&g)
        }
    }
}

/// Supercuspidal matrix coefficient at a torus point of a possibly
/// different quadratic extension than E': decompose with the torus D and
/// feed the Iwasawa coordinates to the Kirillov evaluator.
fn phi_sc_on_torus(
    ev: &mut McEvaluator<'_>,
    eta: &MultChar,
    torus: &LocalFieldParams,
    a: &BigRational,
    b: &BigRational,
    d: i64,
) -> Result<CycValue> {
    use crate::padic::TorusDecomp;
    match crate::padic::conjugated_torus_decompose(torus, a, b, d)? {
        TorusDecomp::Central { .. } => Ok(CycValue::one()),
        TorusDecomp::Upper { beta1, m, i, beta2, .. } => {
            let pref = eta.eval_rat(&beta2);
            Ok(pref.mul(&ev.phi_iwasawa(eta, &beta1, &m, i)?))
        }
        TorusDecomp::Lower { beta1, m1, t, .. } => ev.phi_lower_public(eta, &beta1, &m1, &t),
    }
}

/// Verified invariance depth: starts from the theoretical depth and checks
/// that the summand Phi * Omega is stable under one-level-deeper lifts of
/// every representative (which is exactly what makes the finite sum equal
/// the integral).
pub fn invariance_depth(
    rep: &Rep,
    spec: &TestVectorSpec,
    omega: &MultChar,
    torus: &LocalFieldParams,
) -> Result<u32> {
    let depth = theoretical_depth(torus, rep.c_pi(), spec.d, omega.conductor());
    verify_depth(rep, spec, omega, torus, depth)?;
    Ok(depth)
}

fn verify_depth(
    rep: &Rep,
    spec: &TestVectorSpec,
    omega: &MultChar,
    torus: &LocalFieldParams,
    depth: u32,
) -> Result<()> {
    let measure = TorusMeasure::build(torus, depth);
    let mut ev = match rep {
        Rep::Sc(sc) => Some(McEvaluator::new(sc)),
        Rep::Ps(_) => None,
    };
    let p = torus.p;
    let shift = pi_pow(p, depth as i64);
    for e in &measure.reps {
        let base = phi_value(rep, &mut ev, spec, torus, e)?;
        let base = mul_omega(&base, omega, e);
        // one-deeper lift of the representative's free coordinate
        let mut lifts: Vec<ExtElem> = Vec::new();
        let a_side = match torus.ext {
            ExtKind::Inert => e.b.is_one(),
            ExtKind::Ramified => !e.a.is_one(),
        };
        if a_side {
            let step = match torus.ext {
                ExtKind::Inert => shift.clone(),
                ExtKind::Ramified => pi_pow(p, depth as i64 + 1),
            };
            lifts.push(ExtElem::new(&e.a + &step, e.b.clone()));
        } else {
            lifts.push(ExtElem::new(e.a.clone(), &e.b + &shift));
        }
        for lift in lifts {
            let v = phi_value(rep, &mut ev, spec, torus, &lift)?;
            let v = mul_omega(&v, omega, &lift);
            if !(v.plain.eq_value(&base.plain) && v.radical.eq_value(&base.radical)) {
                return Err(Error::InvalidParams(String::from(
                    "invariance depth verification failed",
                )));
            }
        }
    }
    Ok(())
}

fn mul_omega(v: &SqrtQValue, omega: &MultChar, e: &ExtElem) -> SqrtQValue {
    let w = omega.eval(e);
    SqrtQValue { plain: v.plain.mul(&w), radical: v.radical.mul(&w), q: v.q }
}

/// I(Phi, Omega) as the exact weighted coset sum, with a float mirror.
pub fn local_integral(
    rep: &Rep,
    spec: &TestVectorSpec,
    omega: &MultChar,
    torus: &LocalFieldParams,
    predicted: Option<BigRational>,
    verify: bool,
) -> Result<IntegralReport> {
    let depth = if verify {
        invariance_depth(rep, spec, omega, torus)?
    } else {
        theoretical_depth(torus, rep.c_pi(), spec.d, omega.conductor())
    };
    let measure = TorusMeasure::build(torus, depth);
    let mut ev = match rep {
        Rep::Sc(sc) => Some(McEvaluator::new(sc)),
        Rep::Ps(_) => None,
    };
    let q = rep.q();
    let mut acc = SqrtQValue::zero(q);
    let mut facc = Complex::zero();
    let wf = measure.weight.to_f64().unwrap();
    for e in &measure.reps {
        let phi = phi_value(rep, &mut ev, spec, torus, e)?;
        let term = mul_omega(&phi, omega, e);
        facc = facc.add(phi.to_float().mul(omega.eval_float(e)).scale(wf));
        acc = acc.add(&term);
    }
    acc = acc.scale(&measure.weight);
    Ok(IntegralReport::assemble(acc, facc, predicted, measure.reps.len(), depth))
}

/// The vanishing sweep (diagonal translates away from the canonical one):
/// every pool spec with d != k integrates to exactly zero under the level
/// hypothesis (2/e) c(Omega) < c(pi).
pub struct SweepRow {
    pub d: i64,
    pub eta_key: Option<Vec<u64>>,
    pub omega_key: Vec<u64>,
    pub report: IntegralReport,
}

pub fn vanishing_sweep(
    sc: &ScDatum,
    torus: &LocalFieldParams,
    omegas: &[MultChar],
    d_range: impl Iterator<Item = i64> + Clone,
    etas: &[Option<MultChar>],
) -> Result<Vec<SweepRow>> {
    let k = (sc.c_pi / 2) as i64;
    let mut rows = Vec::new();
    for d in d_range {
        for eta in etas {
            let spec = match eta {
                None => TestVectorSpec::newform(d),
                Some(x) => TestVectorSpec::twisted(x.clone(), d),
            };
            // evaluate Phi once per coset and reuse across the Omega list
            let depth_max = omegas
                .iter()
                .map(|w| theoretical_depth(torus, sc.c_pi, d, w.conductor()))
                .max()
                .unwrap_or(1);
            let measure = TorusMeasure::build(torus, depth_max);
            let mut ev = McEvaluator::new(sc);
            let eta_char = match &spec.eta {
                Some(x) => x.clone(),
                None => MultChar::trivial(sc.fgroup.clone()),
            };
            let mut values: Vec<(usize, CycValue)> = Vec::new();
            for (idx, e) in measure.reps.iter().enumerate() {
                let v = phi_sc_on_torus(&mut ev, &eta_char, torus, &e.a, &e.b, d)?;
                if !v.is_zero() {
                    values.push((idx, v));
                }
            }
            for omega in omegas {
                let mut acc = CycValue::zero();
                let mut facc = Complex::zero();
                let wf = measure.weight.to_f64().unwrap();
                for (idx, v) in &values {
                    let e = &measure.reps[*idx];
                    let term = v.mul(&omega.eval(e));
                    facc = facc.add(v.to_float().mul(omega.eval_float(e)).scale(wf));
                    acc = acc.add(&term);
                }
                let value = SqrtQValue::from_plain(sc.q(), acc.scale(&measure.weight));
                let predicted = if d != k { Some(BigRational::zero()) } else { None };
                let report = IntegralReport::assemble(
                    value,
                    facc,
                    predicted,
                    measure.reps.len(),
                    depth_max,
                );
                rows.push(SweepRow {
                    d,
                    eta_key: spec.eta.as_ref().map(|x| x.key()),
                    omega_key: omega.key(),
                    report,
                });
            }
        }
    }
    Ok(rows)
}

/// Volume identity from the vanishing proof:
/// Vol{v(b D pi^d / a) = c - 1} = (q - 1) Vol{v(b D pi^d / a) >= c}.
pub fn volume_identity(torus: &LocalFieldParams, c_pi: u32, d: i64, depth: u32) -> bool {
    let measure = TorusMeasure::build(torus, depth);
    let c = c_pi as i64;
    let mut at_cm1 = 0u64;
    let mut at_ge_c = 0u64;
    for e in &measure.reps {
        let lower = &e.b * torus.d() * pi_pow(torus.p, d);
        let i = match (valp(torus.p, &lower), valp(torus.p, &e.a)) {
            (None, _) => i64::MAX, // b = 0: central, i = infinity
            (Some(_), None) => -1,
            (Some(x), Some(y)) => x - y,
        };
        if i == c - 1 {
            at_cm1 += 1;
        } else if i >= c {
            at_ge_c += 1;
        }
    }
    at_cm1 == (torus.p - 1) * at_ge_c
}

/// Predicted sign of epsilon(Pi x Omega, 1/2) in the four dichotomy cases.
pub fn epsilon_dichotomy(
    torus_ext: ExtKind,
    c_pi: u32,
    xi: u64,
    p: u64,
    c_omega: u32,
) -> Result<i32> {
    match (torus_ext, c_pi % 2) {
        (ExtKind::Inert, 1) => {
            let k = (c_pi - 1) / 2;
            if c_omega > k {
                return Err(Error::RangeViolation("need c(Omega) <= k".into()));
            }
            Ok(-1)
        }
        (ExtKind::Inert, 0) => {
            let k = c_pi / 2;
            if c_omega >= k {
                return Err(Error::RangeViolation("need c(Omega) < k".into()));
            }
            Ok(1)
        }
        (ExtKind::Ramified, 0) => {
            if c_omega > c_pi - 1 {
                return Err(Error::RangeViolation("need c_E(Omega) <= 2k - 1".into()));
            }
            Ok(-1)
        }
        (ExtKind::Ramified, 1) => {
            let c_theta = c_pi - 1;
            if c_omega >= c_theta {
                return Err(Error::RangeViolation("need c_E(Omega) < c(theta)".into()));
            }
            Ok(legendre((p - xi % p) % p, p))
        }
        _ => unreachable!(),
    }
}

/// Twisting reduction for supercuspidals with a quadratic chi:
/// I(Phi_{1_{chi eta, -d}}, Omega) computed in pi equals
/// I(Phi_{1_{eta, -d}}, Omega chi_E) computed in pi x chi^{-1} = pi_{theta chi_E}.
/// Returns the two reports; exact equality is the identity under test.
pub fn twist_reduce_sc(
    sc: &ScDatum,
    chi: &MultChar,
    eta: Option<&MultChar>,
    d: i64,
    omega: &MultChar,
    torus: &LocalFieldParams,
) -> Result<(IntegralReport, IntegralReport)> {
    let twisted_rep = sc.twisted(chi)?;
    let eta_here = match eta {
        Some(x) => x.clone(),
        None => MultChar::trivial(sc.fgroup.clone()),
    };
    let lhs_spec = TestVectorSpec::twisted(eta_here.mul_char(chi), d);
    let lhs = local_integral(&Rep::Sc(sc.clone()), &lhs_spec, omega, torus, None, false)?;
    // Omega * chi_E on the torus group
    let chi_e_torus = norm_lift(chi, &omega.group);
    let omega2 = omega.mul_char(&chi_e_torus);
    let rhs_spec = match eta {
        Some(x) => TestVectorSpec::twisted(x.clone(), d),
        None => TestVectorSpec::newform(d),
    };
    let rhs = local_integral(&Rep::Sc(twisted_rep), &rhs_spec, &omega2, torus, None, false)?;
    Ok((lhs, rhs))
}

/// For principal series the identity I(Phi, Omega) =
/// I(Phi * chi(det), Omega chi_E^{-1}) is term-by-term; both sides are
/// still computed independently to exercise the chi_E plumbing.
pub fn twist_identity_ps(
    ps: &PsDatum,
    chi: &MultChar,
    d: i64,
    omega: &MultChar,
    torus: &LocalFieldParams,
) -> Result<(SqrtQValue, SqrtQValue)> {
    let depth = theoretical_depth(
        torus,
        ps.n,
        d,
        omega.conductor().max(norm_lift(chi, &omega.group).conductor()),
    );
    let measure = TorusMeasure::build(torus, depth);
    let chi_e = norm_lift(chi, &omega.group);
    let omega_red = omega.mul_char(&chi_e.inv_char());
    let mut lhs = SqrtQValue::zero(ps.q());
    let mut rhs = SqrtQValue::zero(ps.q());
    for e in &measure.reps {
        let g = conjugated_torus_matrix(torus, &e.a, &e.b, d);
        let phi = ps.phi_g(&g)?;
        lhs = lhs.add(&mul_omega(&phi, omega, e));
        // Phi'(e) = Phi(e) chi(N e); Omega' = Omega chi_E^{-1}
        let twisted_phi = {
            let chin = chi.eval_rat(&e.norm(torus));
            SqrtQValue { plain: phi.plain.mul(&chin), radical: phi.radical.mul(&chin), q: phi.q }
        };
        rhs = rhs.add(&mul_omega(&twisted_phi, &omega_red, e));
    }
    Ok((lhs.scale(&measure.weight), rhs.scale(&measure.weight)))
}

/// Certificate for the averaged Omega^{-1}-eigenvector: normality of the
/// congruence subgroup under torus conjugation, invariance of the test
/// vector by its generators, and nonvanishing of the pairing.
#[derive(Clone, Debug)]
pub struct AverageCertificate {
    /// Exponents (r, s) of K_1^1(pi^r, pi^s).
    pub group: (u32, u32),
    pub normality_ok: bool,
    pub vector_fixed: bool,
    /// I(Phi, Omega): the pairing of the average against the test vector.
    pub pairing: SqrtQValue,
}

/// The stated congruence subgroup per case.
pub fn k11_exponents(rep: &Rep, torus_ext: ExtKind) -> (u32, u32) {
    let c = rep.c_pi();
    match (rep, torus_ext) {
        (Rep::Sc(_), ExtKind::Inert) => (c / 2, c / 2),
        (Rep::Sc(_), ExtKind::Ramified) => (c / 2 + 1, c / 2),
        (Rep::Ps(_), ExtKind::Inert) => {
            let k = c / 2;
            if c % 2 == 0 {
                (k, k)
            } else {
                (k + 1, k + 1)
            }
        }
        (Rep::Ps(_), ExtKind::Ramified) => {
            let k = c.div_ceil(2);
            if c % 2 == 0 {
                (k + 1, k)
            } else {
                (k, k - 1)
            }
        }
    }
}

/// Exact normality check t^{-1} K_1^1(pi^r, pi^s) t = K_1^1 for torus
/// elements t, through the generator matrices.
pub fn k11_normality(torus: &LocalFieldParams, r: u32, s: u32, samples: &[ExtElem]) -> bool {
    let p = torus.p;
    let pr = pi_pow(p, r as i64);
    let ps_ = pi_pow(p, s as i64);
    let zero = BigRational::zero;
    let gens: Vec<Mat2> = alloc::vec![
        [[ps_.clone(), zero()], [zero(), zero()]],
        [[zero(), ps_.clone()], [zero(), zero()]],
        [[zero(), zero()], [pr.clone(), zero()]],
        [[zero(), zero()], [zero(), ps_.clone()]],
    ];
    for t in samples {
        if t.is_zero() {
            continue;
        }
        let tm = t.embed(torus);
        let det = t.norm(torus);
        if det.is_zero() {
            continue;
        }
        let tinv = [
            [&tm[1][1] / &det, -&tm[0][1] / &det],
            [-&tm[1][0] / &det, &tm[0][0] / &det],
        ];
        for x in &gens {
            let y = crate::padic::mat_mul(&crate::padic::mat_mul(&tinv, x), &tm);
            let ok = valp(p, &y[0][0]).map_or(true, |v| v >= s as i64)
                && valp(p, &y[0][1]).map_or(true, |v| v >= s as i64)
                && valp(p, &y[1][0]).map_or(true, |v| v >= r as i64)
                && valp(p, &y[1][1]).map_or(true, |v| v >= s as i64);
            if !ok {
                return false;
            }
        }
    }
    true
}

/// Check pi(kappa) 1_{eta,-d} = 1_{eta,-d} for the generators of
/// K_1^1(pi^r, pi^s) through the Kirillov actions (supercuspidal case).
pub fn k11_fixes_sc_vector(sc: &ScDatum, eta: &MultChar, d: i64, r: u32, s: u32) -> Result<bool> {
    use crate::supercuspidal::{GroupGen, KirillovVector};
    let mut ev = McEvaluator::new(sc);
    let p = sc.eprime.p;
    let v = KirillovVector::basis(eta, -d);
    // upper unipotent pi^s
    let w = ev.apply(&GroupGen::Unip(pi_pow(p, s as i64)), &v)?;
    if !w.eq_vector(&v) {
        return Ok(false);
    }
    // diagonal units diag(1 + pi^s, 1) and diag(1, 1 + pi^s)
    let u = BigRational::one() + pi_pow(p, s as i64);
    let w = ev.apply(&GroupGen::Diag(u.clone()), &v)?;
    if !w.eq_vector(&v) {
        return Ok(false);
    }
    // diag(1, a2) = a2 * diag(a2^{-1}, 1): trivial central character
    let w = ev.apply(&GroupGen::Diag(u.recip()), &v)?;
    if !w.eq_vector(&v) {
        return Ok(false);
    }
    // lower unipotent pi^r through the omega conjugation
    let mut w = ev.apply(&GroupGen::Omega, &v)?;
    w = ev.apply(&GroupGen::Unip(-pi_pow(p, r as i64)), &w)?;
    w = ev.apply(&GroupGen::Omega, &w)?;
    Ok(w.eq_vector(&v))
}

/// Assemble the averaged test-vector certificate.
pub fn averaged_test_vector(
    rep: &Rep,
    spec: &TestVectorSpec,
    omega: &MultChar,
    torus: &LocalFieldParams,
) -> Result<AverageCertificate> {
    let report = local_integral(rep, spec, omega, torus, None, false)?;
    if report.value.is_zero() {
        return Err(Error::VanishingIntegral);
    }
    let (r, s) = k11_exponents(rep, torus.ext);
    let samples: Vec<ExtElem> = alloc::vec![
        ExtElem::from_ints(1, 1),
        ExtElem::from_ints(2, 3),
        ExtElem::sqrt_d(),
        ExtElem::from_ints(1, 5),
        ExtElem::from_ints(7, 2),
    ];
    let normality_ok = k11_normality(torus, r, s, &samples);
    let vector_fixed = match rep {
        Rep::Sc(sc) => {
            let eta = match &spec.eta {
                Some(x) => x.clone(),
                None => MultChar::trivial(sc.fgroup.clone()),
            };
            k11_fixes_sc_vector(sc, &eta, spec.d, r, s)?
        }
        Rep::Ps(ps) => crate::principal_series::k11_fixes_newform(ps, r, s),
    };
    Ok(AverageCertificate { group: (r, s), normality_ok, vector_fixed, pairing: report.value })
}

// ---- Decay experiment (float backend) --------------------------------

/// One row of the decay table: |I(Phi_{-n}, Omega)|.
#[derive(Clone, Copy, Debug)]
pub struct DecayRow {
    pub n: u32,
    pub abs_i: f64,
}

#[derive(Clone, Debug)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// Fitted slope of log_q |I| against n.
    pub slope: f64,
    /// Largest |I| change when the pairing truncation is doubled.
    pub truncation_drift: f64,
    /// Largest disagreement between the closed-form spherical coefficient
    /// and the Whittaker-pairing oracle.
    pub oracle_drift: f64,
}

/// Zonal spherical matrix coefficient of the unramified principal series
/// with tempered Satake parameter e^{i theta}, at diag(pi^l, 1).
fn spherical_macdonald(q: f64, theta: f64, l: i64) -> f64 {
    assert!(l >= 0);
    let alpha = Complex::new(libm::cos(theta), libm::sin(theta));
    let beta = alpha.conj();
    let ratio = beta.mul(complex_inv(alpha)); // beta/alpha
    let a = complex_div(
        Complex::one().sub(ratio.scale(1.0 / q)),
        Complex::one().sub(ratio),
    );
    // A + B = 1 + 1/q, so Phi(1) normalizes to 1 below
    let b = Complex::new(1.0 + 1.0 / q - a.re, -a.im);
    let al = complex_pow(alpha, l);
    let bl = complex_pow(beta, l);
    let v = a.mul(al).add(b.mul(bl));
    // value is real for conjugate parameters
    v.re * libm::pow(q, -(l as f64) / 2.0) / (1.0 + 1.0 / q)
}

fn complex_inv(z: Complex) -> Complex {
    let n = z.re * z.re + z.im * z.im;
    Complex::new(z.re / n, -z.im / n)
}

fn complex_div(a: Complex, b: Complex) -> Complex {
    a.mul(complex_inv(b))
}

fn complex_pow(z: Complex, mut k: i64) -> Complex {
    assert!(k >= 0);
    let mut acc = Complex::one();
    let mut b = z;
    while k > 0 {
        if k & 1 == 1 {
            acc = acc.mul(b);
        }
        b = b.mul(b);
        k >>= 1;
    }
    acc
}

/// Whittaker-pairing oracle for the same coefficient, truncated at `t_max`
/// shells (the tail decays geometrically).
fn spherical_pairing_oracle(q: f64, theta: f64, l: i64, t_max: u32) -> f64 {
    let alpha = Complex::new(libm::cos(theta), libm::sin(theta));
    let beta = alpha.conj();
    let w = |t: i64| -> Complex {
        if t < 0 {
            return Complex::zero();
        }
        // q^{-t/2} (alpha^{t+1} - beta^{t+1})/(alpha - beta)
        let num = complex_pow(alpha, t + 1).sub(complex_pow(beta, t + 1));
        let den = alpha.sub(beta);
        if den.abs() < 1e-12 {
            return Complex::new((t + 1) as f64 * libm::pow(q, -(t as f64) / 2.0), 0.0);
        }
        complex_div(num, den).scale(libm::pow(q, -(t as f64) / 2.0))
    };
    let mut num = Complex::zero();
    let mut den = 0.0f64;
    for t in 0..t_max as i64 {
        let wt = w(t);
        num = num.add(w(t + l).mul(wt.conj()));
        den += wt.abs() * wt.abs();
    }
    num.re / den
}

/// Cartan distance of the conjugated torus point: v(det) - 2 min(v(entry)).
fn cartan_distance(torus: &LocalFieldParams, e: &ExtElem, d: i64) -> i64 {
    let p = torus.p;
    let det = e.norm(torus);
    let vdet = valp(p, &det).expect("torus element has nonzero norm");
    let entries = [
        valp(p, &e.a),
        valp(p, &(&e.b / pi_pow(p, d))),
        valp(p, &(&e.b * torus.d() * pi_pow(p, d))),
    ];
    let mu = entries.into_iter().flatten().min().unwrap();
    vdet - 2 * mu
}

/// |I(Phi_{d = -n}, Omega)| for n = 0..n_max with an unramified tempered
/// principal series; float backend only.
pub fn decay_experiment(
    torus: &LocalFieldParams,
    omega: &MultChar,
    n_max: u32,
    satake_theta: f64,
    t_max: u32,
) -> DecayTable {
    assert_eq!(torus.ext, ExtKind::Inert);
    let q = torus.p as f64;
    let mut oracle_drift = 0.0f64;
    let eval_abs = |n: u32, trunc: u32, track_oracle: &mut f64| -> f64 {
        let depth = (n.max(omega.conductor())).max(1);
        let measure = TorusMeasure::build(torus, depth);
        let mut acc = Complex::zero();
        let wf = 1.0 / measure.reps.len() as f64;
        for e in &measure.reps {
            let l = cartan_distance(torus, e, -(n as i64));
            let phi = spherical_pairing_oracle(q, satake_theta, l, trunc);
            let closed = spherical_macdonald(q, satake_theta, l);
            let drift = (phi - closed).abs();
            if drift > *track_oracle {
                *track_oracle = drift;
            }
            acc = acc.add(omega.eval_float(e).scale(phi * wf));
        }
        acc.abs()
    };
    let mut rows = Vec::new();
    let mut drift = 0.0f64;
    for n in 0..=n_max {
        let a = eval_abs(n, t_max, &mut oracle_drift);
        let b = eval_abs(n, 2 * t_max, &mut oracle_drift);
        drift = drift.max((a - b).abs());
        rows.push(DecayRow { n, abs_i: b });
    }
    // least-squares slope of log_q |I| vs n over the nonvanishing rows
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.abs_i > 1e-13)
        .map(|r| (r.n as f64, libm::log(r.abs_i) / libm::log(q)))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    } else {
        0.0
    };
    DecayTable { rows, slope, truncation_drift: drift, oracle_drift }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chars::chars_up_to;

    fn inert(p: u64) -> LocalFieldParams {
        LocalFieldParams::new(p, ExtKind::Inert, 8).unwrap()
    }
    fn ram(p: u64) -> LocalFieldParams {
        LocalFieldParams::new(p, ExtKind::Ramified, 8).unwrap()
    }

    #[test]
    fn measure_counts_and_normalization() {
        let it = inert(5);
        for m in 1..=3u32 {
            let meas = TorusMeasure::build(&it, m);
            assert_eq!(meas.reps.len() as u64, 6 * 5u64.pow(m - 1));
            let total: BigRational = (0..meas.reps.len())
                .map(|_| meas.weight.clone())
                .fold(BigRational::zero(), |a, b| a + b);
            assert!(total.is_one());
        }
        let rm = ram(5);
        for m in 0..=2u32 {
            let meas = TorusMeasure::build(&rm, m);
            assert_eq!(meas.reps.len() as u64, 2 * 5u64.pow(m));
        }
    }

    #[test]
    fn measure_reps_are_inequivalent_and_exhaustive() {
        // pairwise inequivalence mod F^*(1 + pi_E^m) and count matching the
        // group-theoretic index
        for params in [inert(5), ram(5)] {
            for m in 1..=2u32 {
                let meas = TorusMeasure::build(&params, m);
                for (i, x) in meas.reps.iter().enumerate() {
                    for y in meas.reps.iter().skip(i + 1) {
                        let q = x.mul(&y.inv(&params), &params);
                        assert!(
                            !TorusMeasure::equivalent_to_one(&params, &q, match params.ext {
                                ExtKind::Inert => m,
                                ExtKind::Ramified => 2 * m,
                            }),
                            "representatives collide"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn omega_enumeration_counts() {
        let it = inert(5);
        let eg = UnitGroup::e_group(&it, 2);
        assert_eq!(omega_chars(&eg, 1).len(), 6); // q + 1
        assert_eq!(omega_chars(&eg, 2).len(), 30); // (q+1) q
        let rm = ram(5);
        let eg = UnitGroup::e_group(&rm, 2);
        assert_eq!(omega_chars(&eg, 2).len(), 5); // 2 q^k / 2 per component
    }

    #[test]
    fn dichotomy_table() {
        assert_eq!(epsilon_dichotomy(ExtKind::Inert, 3, 1, 5, 1).unwrap(), -1);
        assert_eq!(epsilon_dichotomy(ExtKind::Inert, 4, 1, 5, 1).unwrap(), 1);
        assert_eq!(epsilon_dichotomy(ExtKind::Ramified, 4, 1, 5, 3).unwrap(), -1);
        assert_eq!(epsilon_dichotomy(ExtKind::Ramified, 3, 1, 5, 1).unwrap(), 1);
        assert_eq!(epsilon_dichotomy(ExtKind::Ramified, 3, 2, 5, 1).unwrap(), -1);
        assert!(epsilon_dichotomy(ExtKind::Inert, 4, 1, 5, 2).is_err());
    }

    #[test]
    fn volume_identity_holds() {
        for params in [inert(5), ram(5)] {
            for d in 0..3i64 {
                assert!(volume_identity(&params, 4, d, 4 + 1));
            }
        }
    }

    #[test]
    fn inert_even_value() {
        // I = 4/((q^2-1) q^{k-2}) at p = 5, c_pi = 4, with a proper level-1
        // eta (the eq. 4.13 scenario, criterion 6 at small scale)
        let torus = inert(5);
        let sc = ScDatum::build(5, 4, 1, 0).unwrap();
        let eg = UnitGroup::e_group(&torus, 2);
        let omegas = omega_chars(&eg, 1);
        let etas = chars_up_to(&sc.fgroup, 1);
        let want = BigRational::new(BigInt::from(4), BigInt::from(24 * 5i64.pow(0)));
        let rep = Rep::Sc(sc);
        let mut found = false;
        'outer: for omega in &omegas {
            for eta in &etas {
                if eta.conductor() != 1 {
                    continue;
                }
                let spec = TestVectorSpec::twisted(eta.clone(), 2);
                let r = local_integral(&rep, &spec, omega, &torus, Some(want.clone()), true).unwrap();
                if r.verdict == Verdict::Match {
                    found = true;
                    break 'outer;
                }
            }
        }
        assert!(found, "eq. 4.13 value 1/6 must be attained");
    }

    #[test]
    fn ramified_sc_value_and_dichotomy() {
        // xi = 1: ((-xi)/5) = 1 -> I = 2/((q-1) q^{k-1}) = 1/2 for some
        // level <= 1 eta; xi = 2: all pool specs vanish.
        let torus = ram(5);
        let eg = UnitGroup::e_group(&torus, 2);
        let omegas = omega_chars(&eg, 2);
        let sc1 = ScDatum::build(5, 3, 1, 0).unwrap();
        let etas = chars_up_to(&sc1.fgroup, 1);
        let want = BigRational::new(BigInt::from(2), BigInt::from(4));
        let rep = Rep::Sc(sc1);
        let mut found = false;
        for eta in &etas {
            let spec = TestVectorSpec::twisted(eta.clone(), 1);
            let r = local_integral(&rep, &spec, &omegas[0], &torus, Some(want.clone()), true).unwrap();
            if r.verdict == Verdict::Match {
                found = true;
            }
        }
        assert!(found, "ramified value 1/2 attained");

        let sc2 = ScDatum::build(5, 3, 2, 0).unwrap();
        let rep2 = Rep::Sc(sc2);
        for eta in etas.iter() {
            for d in 0..=2i64 {
                let spec = TestVectorSpec::twisted(eta.clone(), d);
                let r = local_integral(&rep2, &spec, &omegas[0], &torus, Some(BigRational::zero()), false)
                    .unwrap();
                assert!(r.value.is_zero(), "epsilon = -1 case must vanish");
            }
        }
    }

    #[test]
    fn ps_values() {
        // I = 1/((q+1) q^{k-1}) for even mu-level, 1/((q+1) q^k) for odd
        let torus = inert(5);
        let params = LocalFieldParams::new(5, ExtKind::Inert, 8).unwrap();
        let eg = UnitGroup::e_group(&torus, 2);
        let omegas = omega_chars(&eg, 1);
        for (n, want) in [
            (2u32, BigRational::new(BigInt::one(), BigInt::from(6))),
            (3u32, BigRational::new(BigInt::one(), BigInt::from(30))),
        ] {
            let ps = PsDatum::build(params, 0, n).unwrap();
            let d = (n / 2).max(1) as i64;
            let rep = Rep::Ps(ps);
            for omega in omegas.iter().take(3) {
                let spec = TestVectorSpec::newform(d);
                let r = local_integral(&rep, &spec, omega, &torus, Some(want.clone()), true).unwrap();
                assert_eq!(r.verdict, Verdict::Match, "ps value at n={n}");
            }
        }
        // ramified: I = 1/(2 q^{c - k})
        let rtorus = ram(5);
        let eg = UnitGroup::e_group(&rtorus, 2);
        let romegas = omega_chars(&eg, 2);
        for n in [2u32, 3] {
            let ps = PsDatum::build(params, 0, n).unwrap();
            let k = n.div_ceil(2) as i64;
            let d = k - 1;
            let want = BigRational::new(
                BigInt::one(),
                BigInt::from(2) * BigInt::from(5).pow(n - k as u32),
            );
            let rep = Rep::Ps(ps);
            let spec = TestVectorSpec::newform(d);
            let r = local_integral(&rep, &spec, &romegas[0], &rtorus, Some(want), true).unwrap();
            assert_eq!(r.verdict, Verdict::Match, "ramified ps value at n={n}");
        }
    }

    #[test]
    fn vanishing_small() {
        let torus = inert(5);
        let sc = ScDatum::build(5, 4, 1, 0).unwrap();
        let eg = UnitGroup::e_group(&torus, 1);
        let omegas = omega_chars(&eg, 1);
        let etas: Vec<Option<MultChar>> = core::iter::once(None)
            .chain(chars_up_to(&sc.fgroup, 1).into_iter().map(Some))
            .collect();
        let rows = vanishing_sweep(&sc, &torus, &omegas, [0i64, 1, 3].into_iter(), &etas).unwrap();
        for row in rows {
            assert!(row.report.value.is_zero(), "sweep must vanish at d != k");
        }
    }

    #[test]
    fn twist_identity_sc() {
        let torus = inert(5);
        let sc = ScDatum::build(5, 4, 1, 0).unwrap();
        let chi = crate::chars::quadratic_char(&sc.fgroup);
        let eg = UnitGroup::e_group(&torus, 2);
        let omegas = omega_chars(&eg, 1);
        let (lhs, rhs) = twist_reduce_sc(&sc, &chi, None, 2, &omegas[1], &torus).unwrap();
        assert!(lhs.value.plain.eq_value(&rhs.value.plain));
        assert!(lhs.value.radical.eq_value(&rhs.value.radical));
    }

    #[test]
    fn conjugation_symmetry() {
        // I(Phi, Omega o sigma) = conj(I(Phi, Omega)) exactly
        let torus = inert(5);
        let sc = ScDatum::build(5, 4, 1, 0).unwrap();
        let eg = UnitGroup::e_group(&torus, 2);
        let omegas = omega_chars(&eg, 1);
        let eta = chars_up_to(&sc.fgroup, 1).remove(1);
        let rep = Rep::Sc(sc);
        let spec = TestVectorSpec::twisted(eta, 2);
        for omega in omegas.iter().take(4) {
            let a = local_integral(&rep, &spec, omega, &torus, None, false).unwrap();
            let b = local_integral(&rep, &spec, &omega.galois_conj(), &torus, None, false).unwrap();
            assert!(b.value.plain.eq_value(&a.value.plain.conj()));
        }
    }

    #[test]
    fn hermitian_symmetry_of_phi() {
        // Phi_eta(e^{-1}) = conj(Phi_eta(e)) on sampled torus points
        let torus = inert(5);
        let sc = ScDatum::build(5, 4, 1, 0).unwrap();
        let mut ev = McEvaluator::new(&sc);
        let eta = chars_up_to(&sc.fgroup, 1).remove(1);
        for (a, b) in [(1i64, 1i64), (2, 1), (3, 5), (1, 10)] {
            let e = ExtElem::from_ints(a, b);
            let ei = e.inv(&torus);
            let x = phi_sc_on_torus(&mut ev, &eta, &torus, &e.a, &e.b, 2).unwrap();
            let y = phi_sc_on_torus(&mut ev, &eta, &torus, &ei.a, &ei.b, 2).unwrap();
            assert!(y.eq_value(&x.conj()));
        }
    }

    #[test]
    fn averaged_certificate() {
        let torus = inert(5);
        let sc = ScDatum::build(5, 4, 1, 0).unwrap();
        let eg = UnitGroup::e_group(&torus, 2);
        let omegas = omega_chars(&eg, 1);
        let etas = chars_up_to(&sc.fgroup, 1);
        let rep = Rep::Sc(sc);
        let mut issued = false;
        for eta in &etas {
            for omega in &omegas {
                let spec = TestVectorSpec::twisted(eta.clone(), 2);
                match averaged_test_vector(&rep, &spec, omega, &torus) {
                    Ok(cert) => {
                        assert!(cert.normality_ok);
                        assert!(cert.vector_fixed);
                        assert_eq!(cert.group, (2, 2));
                        issued = true;
                    }
                    Err(Error::VanishingIntegral) => {}
                    Err(e) => panic!("unexpected error {e}"),
                }
            }
        }
        assert!(issued);
    }

    #[test]
    fn decay_slope() {
        let torus = inert(5);
        let eg = UnitGroup::e_group(&torus, 1);
        let omega = omega_chars(&eg, 1).remove(1);
        let table = decay_experiment(&torus, &omega, 5, 1.047, 64);
        assert!(table.slope <= -3.0 / 8.0 + 0.05, "slope {} too shallow", table.slope);
        assert!(table.truncation_drift <= 1e-9);
        assert!(table.oracle_drift <= 1e-9);
    }
}
