//! Constrained randomization by bounded rejection sampling.

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use super::rng::Rng;

/// Per-field value domain.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// Union of inclusive ranges. A draw picks a range uniformly, then a
    /// value uniformly inside it, so each listed range carries equal
    /// probability regardless of its width.
    Ranges(Vec<(u64, u64)>),
    /// Explicit value set, drawn uniformly.
    Values(Vec<u64>),
}

impl Domain {
    pub fn range(lo: u64, hi: u64) -> Self {
        Domain::Ranges(vec![(lo, hi)])
    }

    pub fn values(xs: &[u64]) -> Self {
        Domain::Values(xs.to_vec())
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Domain::Ranges(rs) => rs.is_empty() || rs.iter().any(|(lo, hi)| lo > hi),
            Domain::Values(vs) => vs.is_empty(),
        }
    }

    pub fn contains(&self, v: u64) -> bool {
        match self {
            Domain::Ranges(rs) => rs.iter().any(|&(lo, hi)| v >= lo && v <= hi),
            Domain::Values(vs) => vs.contains(&v),
        }
    }

    fn draw(&self, rng: &mut Rng) -> u64 {
        match self {
            Domain::Ranges(rs) => {
                let &(lo, hi) = rng.pick(rs);
                rng.in_range(lo, hi)
            }
            Domain::Values(vs) => *rng.pick(vs),
        }
    }
}

#[derive(Clone)]
pub struct FieldSpec {
    pub name: String,
    pub domain: Domain,
}

/// Named cross-field predicate over a candidate assignment.
#[derive(Clone)]
pub struct Predicate {
    pub name: String,
    pub check: Rc<dyn Fn(&Assignment) -> bool>,
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Predicate({})", self.name)
    }
}

pub type Assignment = BTreeMap<String, u64>;

/// Field domains plus cross-field predicates.
#[derive(Clone, Default, Debug)]
pub struct Constraint {
    pub fields: Vec<FieldSpec>,
    pub predicates: Vec<Predicate>,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}", self.name, self.domain)
    }
}

impl Constraint {
    pub fn new() -> Self {
        Constraint::default()
    }

    pub fn field(mut self, name: &str, domain: Domain) -> Self {
        self.fields.push(FieldSpec {
            name: name.to_string(),
            domain,
        });
        self
    }

    pub fn predicate(mut self, name: &str, check: impl Fn(&Assignment) -> bool + 'static) -> Self {
        self.predicates.push(Predicate {
            name: name.to_string(),
            check: Rc::new(check),
        });
        self
    }
}

/// Attempts per randomize call before declaring the constraint
/// unsatisfiable.
pub const REJECTION_BOUND: u32 = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum ConstraintError {
    #[error("field {0} has an empty domain")]
    EmptyDomain(String),
    #[error("no assignment satisfied [{}] within {tries} tries", predicates.join(", "))]
    Unsatisfiable { tries: u32, predicates: Vec<String> },
}

/// Draws an assignment: each field uniformly from its domain, repeated
/// until every predicate holds or the rejection bound is exhausted.
/// Deterministic given the rng state.
pub fn randomize(c: &Constraint, rng: &mut Rng) -> Result<Assignment, ConstraintError> {
    for f in &c.fields {
        if f.domain.is_empty() {
            return Err(ConstraintError::EmptyDomain(f.name.clone()));
        }
    }
    for _ in 0..REJECTION_BOUND {
        let mut asg = Assignment::new();
        for f in &c.fields {
            asg.insert(f.name.clone(), f.domain.draw(rng));
        }
        if c.predicates.iter().all(|p| (p.check)(&asg)) {
            return Ok(asg);
        }
    }
    Err(ConstraintError::Unsatisfiable {
        tries: REJECTION_BOUND,
        predicates: c.predicates.iter().map(|p| p.name.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_range_draw_is_deterministic() {
        let c = Constraint::new().field("gain", Domain::range(0x00, 0xFF));
        let a = randomize(&c, &mut Rng::for_path(4, "t")).unwrap();
        let b = randomize(&c, &mut Rng::for_path(4, "t")).unwrap();
        assert!(a["gain"] <= 0xFF);
        assert_eq!(a, b, "same seed, same value");
    }

    #[test]
    fn impossible_predicate_names_itself_in_the_error() {
        let c = Constraint::new()
            .field("a", Domain::range(0, 9))
            .field("b", Domain::range(0, 9))
            .predicate("a_plus_b_is_100", |asg| asg["a"] + asg["b"] == 100);
        let err = randomize(&c, &mut Rng::from_seed(1)).unwrap_err();
        assert_eq!(
            err,
            ConstraintError::Unsatisfiable {
                tries: REJECTION_BOUND,
                predicates: vec!["a_plus_b_is_100".to_string()],
            }
        );
    }

    #[test]
    fn satisfiable_predicate_always_holds_on_output() {
        let c = Constraint::new()
            .field("width", Domain::values(&[16, 32, 64]))
            .field("height", Domain::values(&[16, 32]))
            .predicate("width_ge_height", |a| a["width"] >= a["height"]);
        let mut rng = Rng::from_seed(2);
        for _ in 0..200 {
            let a = randomize(&c, &mut rng).unwrap();
            assert!(a["width"] >= a["height"]);
            assert!([16, 32, 64].contains(&a["width"]));
            assert!([16, 32].contains(&a["height"]));
        }
    }

    #[test]
    fn empty_domain_is_reported_before_sampling() {
        let c = Constraint::new().field("x", Domain::Values(vec![]));
        assert_eq!(
            randomize(&c, &mut Rng::from_seed(0)),
            Err(ConstraintError::EmptyDomain("x".to_string()))
        );
        let c = Constraint::new().field("y", Domain::Ranges(vec![(5, 2)]));
        assert!(matches!(
            randomize(&c, &mut Rng::from_seed(0)),
            Err(ConstraintError::EmptyDomain(_))
        ));
    }

    #[test]
    fn each_listed_range_gets_equal_weight() {
        // Four single-point-or-narrow ranges: all four must show up well
        // over 1000 draws even though their widths differ wildly.
        let c = Constraint::new().field(
            "gain",
            Domain::Ranges(vec![(0, 0), (1, 0x0F), (0x10, 0x10), (0x11, 0xFF)]),
        );
        let mut rng = Rng::from_seed(3);
        let mut counts = [0u32; 4];
        for _ in 0..1000 {
            let v = randomize(&c, &mut rng).unwrap()["gain"];
            let slot = match v {
                0 => 0,
                1..=0x0F => 1,
                0x10 => 2,
                _ => 3,
            };
            counts[slot] += 1;
        }
        for (i, &n) in counts.iter().enumerate() {
            assert!(n > 150, "range {i} drew only {n} of 1000");
        }
    }
}
