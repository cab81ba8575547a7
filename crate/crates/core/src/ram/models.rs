use std::fmt::Write as _;

use crate::ctmc::build_state_space;
use crate::error::{Error, Result};
use crate::fmt::format_sig;
use crate::lang::ast::ModelAst;
use crate::lang::bind::{bind_constants, Bindings};
use crate::lang::{parse_model, Value};
use crate::numerics::{cumulative_reward, NumericOptions};
use crate::ram::{RamParams, LIFETIME};

pub const SATELLITE_CTMC: &str = include_str!("../../models/satellite.ctmc");
pub const CONSTELLATION_CTMC: &str = include_str!("../../models/constellation.ctmc");

/// Bundled model source by name (`satellite` or `constellation`).
pub fn bundled_model(name: &str) -> Option<&'static str> {
    match name.trim_end_matches(".ctmc") {
        "satellite" => Some(SATELLITE_CTMC),
        "constellation" => Some(CONSTELLATION_CTMC),
        _ => None,
    }
}

fn num(x: f64) -> String {
    format_sig(x, 17)
}

pub fn single_satellite_text(p: &RamParams) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "// Single satellite: interruptions, failure, on-orbit repair and replacement.
//  s=0 normal            s=4 on-orbit repair
//  s=1 planned outage    s=5 replacement decided, spare on the ground
//  s=2 unplanned outage  s=6 manufacturing a new spare
//  s=3 failed            s=7 launch and positioning
ctmc

const double r = {r};
const double MTBF = {mtbf};
const double MTTR = {mttr};
const double t_u = {t_u};
const double t_p = {t_p};
const double d_u = {d_u};
const double o = {o};
const double p_b = {p_b};
const double t_r = {t_r};
const double t_d = {t_d};
const double t_e = {t_e};
const double t_k = {t_k};
const double p_y = {p_y};

const double lambda = -ln(r) / MTBF;
const double mu = 1 / MTTR;

module satellite
  s : [0..7] init 0;

  [] s=0 -> 1 / t_p : (s'=1);
  [] s=1 -> 1 / o : (s'=0);
  [u] s=0 -> 1 / t_u : (s'=2);
  [] s=2 -> 1 / d_u : (s'=0);
  [] s=0 -> lambda : (s'=3);
  [d] s=3 -> p_b * mu : (s'=4);
  [] s=3 -> (1 - p_b) * mu : (s'=5);
  [] s=4 -> p_b * mu : (s'=0);
  [f] s=4 -> (1 - p_b) * mu : (s'=5);
  [g] s=5 -> p_y / t_r : (s'=7);
  [e] s=5 -> (1 - p_y) / t_r : (s'=6);
  [] s=6 -> 1 / t_d : (s'=7);
  [] s=7 -> 1 / t_k : (s'=0);
endmodule

label \"operational\" = s=0;
label \"spare_on_ground\" = s=5;

rewards \"num_replace\"
  [g] true : 1;
  [e] true : 1;
endrewards

rewards \"num_repair\"
  [d] true : 1;
endrewards

rewards \"num_repair_fail\"
  [f] true : 1;
endrewards

rewards \"num_unplanned\"
  [u] true : 1;
endrewards

rewards \"availability\"
  s=0 : 1;
endrewards
",
        r = num(p.r),
        mtbf = num(p.mtbf),
        mttr = num(p.mttr),
        t_u = num(p.t_u),
        t_p = num(p.t_p),
        d_u = num(p.d_u),
        o = num(p.d_p),
        p_b = num(p.p_b),
        t_r = num(p.t_r),
        t_d = num(p.t_d),
        t_e = num(p.t_e),
        t_k = num(p.t_k),
        p_y = num(p.p_y),
    );
    out
}

pub fn constellation_text(p: &RamParams) -> String {
    format!(
        "// Constellation of n slots backed by m spares; s counts failed satellites.
// One repair facility; failures of active satellites race at rate lambda each.
ctmc

const double r = {r};
const double MTBF = {mtbf};
const double MTTR = {mttr};
const int n = {n};
const int m = {m};

const double lambda = -ln(r) / MTBF;
const double mu = 1 / MTTR;

module constellation
  s : [0..n+m] init 0;

  [] s<n+m & s!=m -> min(n, n+m-s) * lambda : (s'=s+1);
  [a2] s=m -> n * lambda : (s'=s+1);
  [b] s>0 -> mu : (s'=s-1);
endmodule

label \"full\" = s<=m;

rewards \"num_fail\"
  [a2] true : 1;
endrewards

rewards \"num_repair\"
  [b] true : 1;
endrewards

rewards \"availability\"
  s<=m : 1;
endrewards
",
        r = num(p.r),
        mtbf = num(p.mtbf),
        mttr = num(p.mttr),
        n = p.n,
        m = p.m,
    )
}

pub fn build_single_satellite_model(p: &RamParams) -> Result<ModelAst> {
    p.validate()?;
    parse_model(&single_satellite_text(p))
}

pub fn build_constellation_model(p: &RamParams) -> Result<ModelAst> {
    p.validate()?;
    parse_model(&constellation_text(p))
}

/// Finds `d_u` such that time-averaged availability over the lifetime is
/// `target` when planned interruptions last `o` hours.
pub fn calibrate_d_u(base: &RamParams, o: f64, target: f64, opts: &NumericOptions) -> Result<f64> {
    let ast = build_single_satellite_model(base)?;
    let availability = |d_u: f64| -> Result<f64> {
        let mut b = Bindings::new();
        b.insert("d_u".into(), Value::Real(d_u));
        b.insert("o".into(), Value::Real(o));
        let model = build_state_space(&bind_constants(&ast, &b)?)?;
        Ok(cumulative_reward(&model.ctmc, model.reward("availability")?, LIFETIME, opts)? / LIFETIME)
    };
    // availability falls as outages lengthen
    let (mut lo, mut hi) = (0.5, 50.0);
    if availability(lo)? < target || availability(hi)? > target {
        return Err(Error::Domain(format!("availability {target} not reachable for d_u in [{lo}, {hi}]")));
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if availability(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ram::DEFAULT_D_U;

    #[test]
    fn bundled_files_match_generators() {
        if std::env::var_os("RAMCHECK_BLESS").is_some() {
            let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/models");
            std::fs::write(format!("{dir}/satellite.ctmc"), single_satellite_text(&RamParams::single_satellite())).unwrap();
            std::fs::write(format!("{dir}/constellation.ctmc"), constellation_text(&RamParams::constellation())).unwrap();
            return;
        }
        assert_eq!(SATELLITE_CTMC, single_satellite_text(&RamParams::single_satellite()));
        assert_eq!(CONSTELLATION_CTMC, constellation_text(&RamParams::constellation()));
    }

    #[test]
    fn state_space_sizes() {
        let sat = build_state_space(&build_single_satellite_model(&RamParams::single_satellite()).unwrap()).unwrap();
        assert_eq!((sat.ctmc.num_states(), sat.ctmc.num_transitions()), (8, 13));
        let con = build_state_space(&build_constellation_model(&RamParams::constellation()).unwrap()).unwrap();
        assert_eq!((con.ctmc.num_states(), con.ctmc.num_transitions()), (28, 54));
    }

    #[test]
    fn constellation_rates() {
        let p = RamParams::constellation();
        let (l, mu) = p.rates().unwrap();
        let con = build_state_space(&build_constellation_model(&p).unwrap()).unwrap().ctmc;
        let at = |v: i64| (0..con.num_states()).find(|&s| con.valuation(s)[0] == v).unwrap();
        assert!((con.rate(at(0), at(1)) - 24.0 * l).abs() < 1e-18);
        assert!((con.rate(at(5), at(6)) - 22.0 * l).abs() < 1e-18);
        assert_eq!(con.rate(at(5), at(4)), mu);
        let a2: Vec<_> = con
            .all_transitions()
            .iter()
            .filter(|t| con.action_name(t) == Some("a2"))
            .collect();
        assert_eq!(a2.len(), 1);
        assert_eq!(con.valuation(a2[0].target)[0], 4);
    }

    #[test]
    fn no_spares_variant() {
        let p = RamParams {
            m: 0,
            n: 2,
            ..RamParams::constellation()
        };
        let con = build_state_space(&build_constellation_model(&p).unwrap()).unwrap().ctmc;
        assert_eq!(con.num_states(), 3);
    }

    #[test]
    fn default_d_u_is_calibrated() {
        let d_u = calibrate_d_u(&RamParams::single_satellite(), 16.0, 0.995, &NumericOptions::default()).unwrap();
        assert!((d_u - DEFAULT_D_U).abs() < 0.01, "{d_u}");
    }
}
