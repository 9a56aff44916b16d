//! Canonical small models.
//!
//! `FORK`: one unmeasured variable fanning out to two measured outputs.
//! `CHAIN`: two unmeasured variables in line. `STAR`: one unmeasured hub
//! with two redundant definitions and two consumers.

use crate::model::CausalGraph;
use crate::text::parse_model;

pub const FORK: &str = "\
var P measured
var U unmeasured
var X measured
var Y measured
inf c1 : U = 2*P
inf c2 : X = 1*U + 1
inf c3 : Y = 3*U
";

pub const CHAIN: &str = "\
var P measured
var U1 unmeasured
var U2 unmeasured
var X measured
inf c1 : U1 = 1*P + 1
inf c2 : U2 = 2*U1
inf c3 : X = 1*U2 + 3
";

pub const STAR: &str = "\
var P1 measured
var P2 measured
var U unmeasured
var X1 measured
var X2 measured
inf i1 : U = 1*P1
inf i2 : U = 1*P2
inf i3 : X1 = 1*U
inf i4 : X2 = 1*U
";

pub fn fork() -> CausalGraph {
    parse_model(FORK).expect("FORK fixture is valid")
}

pub fn chain() -> CausalGraph {
    parse_model(CHAIN).expect("CHAIN fixture is valid")
}

pub fn star() -> CausalGraph {
    parse_model(STAR).expect("STAR fixture is valid")
}
