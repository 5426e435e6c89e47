use serde::{Deserialize, Serialize};

use crate::vecspace::{PairPoint, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    Scalar(f64),
    Pair(PairPoint),
    Vector(Vector),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Labeled {
    pub label: String,
    pub value: Witness,
}

/// One step of a schedule: the parameter (`lambda` or `n`), the quotient or
/// product it produced, and the graph point that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub param: f64,
    pub quotient: f64,
    pub witness: PairPoint,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuotientTrace {
    pub entries: Vec<TraceEntry>,
}

impl QuotientTrace {
    pub fn push(&mut self, param: f64, quotient: f64, witness: PairPoint) {
        self.entries.push(TraceEntry {
            param,
            quotient,
            witness,
        });
    }

    pub fn quotients(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.quotient).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A check verdict with the numbers that justify it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub check_name: String,
    pub witnesses: Vec<Labeled>,
    pub narrative: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<QuotientTrace>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn new(verdict: Verdict, check_name: &str, narrative: impl Into<String>) -> Self {
        Certificate {
            verdict,
            check_name: check_name.to_string(),
            witnesses: Vec::new(),
            narrative: narrative.into(),
            trace: None,
            notes: Vec::new(),
        }
    }

    pub fn pass(check_name: &str, narrative: impl Into<String>) -> Self {
        Self::new(Verdict::Pass, check_name, narrative)
    }

    pub fn fail(check_name: &str, narrative: impl Into<String>) -> Self {
        Self::new(Verdict::Fail, check_name, narrative)
    }

    pub fn not_applicable(check_name: &str, narrative: impl Into<String>) -> Self {
        Self::new(Verdict::NotApplicable, check_name, narrative)
    }

    /// Non-finite scalars are clamped to `f64::MAX` so reports stay valid JSON.
    pub fn scalar(mut self, label: &str, v: f64) -> Self {
        let v = if v.is_nan() {
            0.0
        } else {
            v.clamp(f64::MIN, f64::MAX)
        };
        self.witnesses.push(Labeled {
            label: label.to_string(),
            value: Witness::Scalar(v),
        });
        self
    }

    pub fn pair(mut self, label: &str, p: &PairPoint) -> Self {
        self.witnesses.push(Labeled {
            label: label.to_string(),
            value: Witness::Pair(p.clone()),
        });
        self
    }

    pub fn vector(mut self, label: &str, v: &Vector) -> Self {
        self.witnesses.push(Labeled {
            label: label.to_string(),
            value: Witness::Vector(v.clone()),
        });
        self
    }

    pub fn with_trace(mut self, trace: QuotientTrace) -> Self {
        self.trace = Some(trace);
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn is_pass(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn get(&self, label: &str) -> Option<&Witness> {
        self.witnesses.iter().find(|w| w.label == label).map(|w| &w.value)
    }

    pub fn get_scalar(&self, label: &str) -> Option<f64> {
        match self.get(label)? {
            Witness::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    pub fn get_pair(&self, label: &str) -> Option<&PairPoint> {
        match self.get(label)? {
            Witness::Pair(p) => Some(p),
            _ => None,
        }
    }

    /// First scalar witness, used as the one-number summary in CSV output.
    pub fn key_scalar(&self) -> Option<(&str, f64)> {
        self.witnesses.iter().find_map(|w| match w.value {
            Witness::Scalar(v) => Some((w.label.as_str(), v)),
            _ => None,
        })
    }
}
