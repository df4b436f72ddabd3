use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Comparator {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Lt => value < threshold,
            Comparator::Le => value <= threshold,
            Comparator::Gt => value > threshold,
            Comparator::Ge => value >= threshold,
        }
    }

    /// True for `>` and `>=`, where larger probabilities are the desired side.
    pub fn higher_is_better(self) -> bool {
        matches!(self, Comparator::Gt | Comparator::Ge)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateFormula {
    True,
    False,
    Label(String),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Or(Box<StateFormula>, Box<StateFormula>),
}

impl StateFormula {
    pub fn label(name: &str) -> Self {
        StateFormula::Label(name.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: StateFormula) -> Self {
        StateFormula::Not(Box::new(f))
    }

    pub fn and(a: StateFormula, b: StateFormula) -> Self {
        StateFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: StateFormula, b: StateFormula) -> Self {
        StateFormula::Or(Box::new(a), Box::new(b))
    }

    /// Labels mentioned anywhere in the formula.
    pub fn labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            StateFormula::True | StateFormula::False => {}
            StateFormula::Label(l) => out.push(l),
            StateFormula::Not(f) => f.collect_labels(out),
            StateFormula::And(a, b) | StateFormula::Or(a, b) => {
                a.collect_labels(out);
                b.collect_labels(out);
            }
        }
    }
}

/// Path formulas. `bound: Some(k)` limits the operator to `k` steps.
#[derive(Clone, Debug, PartialEq)]
pub enum PathFormula {
    Next(StateFormula),
    Until {
        left: StateFormula,
        right: StateFormula,
        bound: Option<u64>,
    },
    Eventually {
        target: StateFormula,
        bound: Option<u64>,
    },
    Globally {
        invariant: StateFormula,
        bound: Option<u64>,
    },
    /// Reach a state satisfying the first formula and afterwards (possibly
    /// in the same state) one satisfying the second.
    Seq(StateFormula, StateFormula),
}

impl PathFormula {
    pub fn labels(&self) -> Vec<&str> {
        match self {
            PathFormula::Next(f)
            | PathFormula::Eventually { target: f, .. }
            | PathFormula::Globally { invariant: f, .. } => f.labels(),
            PathFormula::Until { left, right, .. } | PathFormula::Seq(left, right) => {
                let mut out = left.labels();
                out.extend(right.labels());
                out
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbBound {
    Query,
    Compare(Comparator, f64),
}

/// A top-level probabilistic property `P=? [ path ]` or `P~θ [ path ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Property {
    pub bound: ProbBound,
    pub path: PathFormula,
}

impl Property {
    pub fn query(path: PathFormula) -> Self {
        Property {
            bound: ProbBound::Query,
            path,
        }
    }
}

fn write_bound(f: &mut fmt::Formatter<'_>, bound: Option<u64>) -> fmt::Result {
    match bound {
        Some(k) => write!(f, "<={k}"),
        None => Ok(()),
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFormula::True => write!(f, "true"),
            StateFormula::False => write!(f, "false"),
            StateFormula::Label(l) => write!(f, "\"{l}\""),
            StateFormula::Not(a) => write!(f, "!{a}"),
            StateFormula::And(a, b) => write!(f, "({a} & {b})"),
            StateFormula::Or(a, b) => write!(f, "({a} | {b})"),
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Next(a) => write!(f, "X {a}"),
            PathFormula::Until { left, right, bound } => {
                write!(f, "{left} U")?;
                write_bound(f, *bound)?;
                write!(f, " {right}")
            }
            PathFormula::Eventually { target, bound } => {
                write!(f, "F")?;
                write_bound(f, *bound)?;
                write!(f, " {target}")
            }
            PathFormula::Globally { invariant, bound } => {
                write!(f, "G")?;
                write_bound(f, *bound)?;
                write!(f, " {invariant}")
            }
            PathFormula::Seq(a, b) => write!(f, "SEQ({a}, {b})"),
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bound {
            ProbBound::Query => write!(f, "P=? [ {} ]", self.path),
            ProbBound::Compare(c, t) => write!(f, "P{}{} [ {} ]", c.symbol(), t, self.path),
        }
    }
}
