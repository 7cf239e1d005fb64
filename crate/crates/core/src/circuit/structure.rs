use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{Circuit, Field, UnitId, UnitKind};
use crate::error::{Error, Result};
use crate::input::{Family, InputFunction};
use crate::scope::Scope;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub unit: UnitId,
    pub property: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructReport {
    pub smooth: bool,
    pub decomposable: bool,
    pub witnesses: Vec<Violation>,
}

pub fn check_smooth_decomposable(c: &Circuit) -> StructReport {
    let mut witnesses = Vec::new();
    for (id, u) in c.units().iter().enumerate() {
        match &u.kind {
            UnitKind::Sum { inputs, .. } => {
                let first = &c.unit(inputs[0]).scope;
                if let Some(&bad) = inputs.iter().find(|&&i| &c.unit(i).scope != first) {
                    witnesses.push(Violation {
                        unit: id,
                        property: "smoothness",
                        detail: format!(
                            "input scopes {:?} and {:?} differ",
                            first,
                            c.unit(bad).scope
                        ),
                    });
                }
            }
            UnitKind::Product { inputs } => {
                let (a, b) = (&c.unit(inputs[0]).scope, &c.unit(inputs[1]).scope);
                if !a.is_disjoint(b) {
                    witnesses.push(Violation {
                        unit: id,
                        property: "decomposability",
                        detail: format!("input scopes overlap on {:?}", a.intersection(b)),
                    });
                }
            }
            UnitKind::Input { .. } => {}
        }
    }
    StructReport {
        smooth: witnesses.iter().all(|w| w.property != "smoothness"),
        decomposable: witnesses.iter().all(|w| w.property != "decomposability"),
        witnesses,
    }
}

pub fn require_smooth_decomposable(c: &Circuit) -> Result<()> {
    let r = check_smooth_decomposable(c);
    match r.witnesses.first() {
        None => Ok(()),
        Some(w) => Err(Error::Structure(format!(
            "unit {} violates {}: {}",
            w.unit, w.property, w.detail
        ))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompatReport {
    pub compatible: bool,
    pub witnesses: Vec<String>,
}

type Split = (Scope, Scope);

/// Children scopes ordered by their smallest variable index.
pub(crate) fn canonical_split(a: &Scope, b: &Scope) -> Split {
    if a.min_var() <= b.min_var() {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

fn splits(c: &Circuit) -> BTreeMap<Scope, BTreeSet<Split>> {
    let mut m: BTreeMap<Scope, BTreeSet<Split>> = BTreeMap::new();
    for u in c.units() {
        if let UnitKind::Product { inputs } = &u.kind {
            let s = canonical_split(&c.unit(inputs[0]).scope, &c.unit(inputs[1]).scope);
            m.entry(u.scope.clone()).or_default().insert(s);
        }
    }
    m
}

fn leaf_families(c: &Circuit) -> Result<BTreeMap<usize, Vec<(Family, InputFunction)>>> {
    let mut m: BTreeMap<usize, Vec<(Family, InputFunction)>> = BTreeMap::new();
    for u in c.units() {
        if let UnitKind::Input { var, function } = &u.kind {
            let fam = function.family()?;
            let e = m.entry(*var).or_default();
            if !e.iter().any(|(f, _)| *f == fam) {
                e.push((fam, function.clone()));
            }
        }
    }
    Ok(m)
}

/// Two circuits are compatible when every pair of same-scope leaves has a
/// closed-form product and every pair of same-scope products splits its scope
/// the same way.
pub fn check_compatible(c1: &Circuit, c2: &Circuit) -> Result<CompatReport> {
    require_smooth_decomposable(c1)?;
    require_smooth_decomposable(c2)?;
    if c1.variables() != c2.variables() {
        return Err(Error::Scope("circuits use different variable tables".into()));
    }
    let mut witnesses = Vec::new();
    let (l1, l2) = (leaf_families(c1)?, leaf_families(c2)?);
    for (var, fams) in &l1 {
        if let Some(other) = l2.get(var) {
            for (_, f) in fams {
                for (_, g) in other {
                    if let Err(e) = InputFunction::product_supported(f, g) {
                        witnesses.push(format!("leaves over {}: {e}", c1.variables()[*var].name));
                    }
                }
            }
        }
    }
    let (s1, s2) = (splits(c1), splits(c2));
    for (scope, a) in &s1 {
        if let Some(b) = s2.get(scope) {
            let all: BTreeSet<&Split> = a.iter().chain(b.iter()).collect();
            if all.len() > 1 {
                let mut it = all.into_iter();
                let (x, y) = (it.next().unwrap(), it.next().unwrap());
                witnesses.push(format!(
                    "scope {:?} split as {:?}|{:?} and {:?}|{:?}",
                    scope, x.0, x.1, y.0, y.1
                ));
            }
        }
    }
    Ok(CompatReport { compatible: witnesses.is_empty(), witnesses })
}

pub fn structured_decomposable(c: &Circuit) -> Result<bool> {
    Ok(check_compatible(c, c)?.compatible)
}

/// Nonnegative weights and nonnegative leaves. Cached on the circuit.
pub fn check_monotone(c: &Circuit) -> Result<bool> {
    if c.field() != Field::Real {
        return Err(Error::Field("monotonicity is defined for real circuits only".into()));
    }
    Ok(*c.cached_monotone().get_or_init(|| {
        c.units().iter().all(|u| match &u.kind {
            UnitKind::Sum { weights, .. } => weights.iter().all(|w| w.im == 0.0 && w.re >= 0.0),
            UnitKind::Input { function, .. } => function.is_nonnegative(),
            UnitKind::Product { .. } => true,
        })
    }))
}

/// Scopes derived bottom-up from scratch, for cross-checking the cached ones.
pub fn recompute_scopes(c: &Circuit) -> Vec<Scope> {
    fn go(c: &Circuit, id: UnitId, memo: &mut Vec<Option<Scope>>) -> Scope {
        if let Some(s) = &memo[id] {
            return s.clone();
        }
        let s = match &c.unit(id).kind {
            UnitKind::Input { var, .. } => Scope::singleton(*var),
            _ => {
                let mut s = Scope::empty();
                for &i in c.unit(id).inputs() {
                    s = s.union(&go(c, i, memo));
                }
                s
            }
        };
        memo[id] = Some(s.clone());
        s
    }
    let mut memo = vec![None; c.num_units()];
    (0..c.num_units()).map(|id| go(c, id, &mut memo)).collect()
}
