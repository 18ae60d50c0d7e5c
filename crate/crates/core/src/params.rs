//! Market primitives, recycling-model identifiers and per-model decision bundles.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// The three recycling frameworks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    /// Manufacturer collects used items.
    M,
    /// Retailer collects used items against a transfer price.
    R,
    /// Both collect; customers pick the better subsidy.
    MR,
}

impl ModelId {
    pub const ALL: [ModelId; 3] = [ModelId::M, ModelId::R, ModelId::MR];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::M => "M",
            ModelId::R => "R",
            ModelId::MR => "MR",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "m" => Ok(ModelId::M),
            "r" => Ok(ModelId::R),
            "mr" => Ok(ModelId::MR),
            other => Err(format!("unknown model `{other}` (expected m, r or mr)")),
        }
    }
}

/// Names of the decision variables, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "p_m")]
    DirectPrice,
    #[serde(rename = "p_r")]
    RetailPrice,
    #[serde(rename = "w")]
    Wholesale,
    #[serde(rename = "b_m")]
    ManufacturerSubsidy,
    #[serde(rename = "b_r")]
    RetailerSubsidy,
    #[serde(rename = "t")]
    Transfer,
}

impl Field {
    pub const ALL: [Field; 6] = [
        Field::DirectPrice,
        Field::RetailPrice,
        Field::Wholesale,
        Field::ManufacturerSubsidy,
        Field::RetailerSubsidy,
        Field::Transfer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::DirectPrice => "p_m",
            Field::RetailPrice => "p_r",
            Field::Wholesale => "w",
            Field::ManufacturerSubsidy => "b_m",
            Field::RetailerSubsidy => "b_r",
            Field::Transfer => "t",
        }
    }

    /// Subsidies and the transfer price, as opposed to selling/wholesale prices.
    pub fn is_subsidy_like(self) -> bool {
        matches!(
            self,
            Field::ManufacturerSubsidy | Field::RetailerSubsidy | Field::Transfer
        )
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Field::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown decision variable `{s}`"))
    }
}

const M_FIELDS: [Field; 4] = [
    Field::DirectPrice,
    Field::RetailPrice,
    Field::Wholesale,
    Field::ManufacturerSubsidy,
];
const R_FIELDS: [Field; 5] = [
    Field::DirectPrice,
    Field::RetailPrice,
    Field::Wholesale,
    Field::RetailerSubsidy,
    Field::Transfer,
];
const MR_FIELDS: [Field; 6] = Field::ALL;

/// Decision variables of `model`, in the stable order used by every report.
pub fn decision_fields(model: ModelId) -> &'static [Field] {
    match model {
        ModelId::M => &M_FIELDS,
        ModelId::R => &R_FIELDS,
        ModelId::MR => &MR_FIELDS,
    }
}

/// Validated market primitives. `delta` is always `c_m - c_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    alpha: f64,
    c_m: f64,
    c_r: f64,
    delta: f64,
    s: f64,
}

impl Params {
    pub fn new(alpha: f64, c_m: f64, c_r: f64, s: f64) -> Result<Self> {
        let mut violations = Vec::new();
        let mut check = |field: &str, value: f64, ok: bool, constraint: &str| {
            if !ok {
                violations.push(Violation {
                    field: field.to_string(),
                    value,
                    constraint: constraint.to_string(),
                });
            }
        };
        check("alpha", alpha, alpha > 0.0 && alpha < 1.0, "0 < alpha < 1");
        check("c_m", c_m, c_m.is_finite() && c_m > 0.0, "c_m > 0");
        check("c_r", c_r, c_r.is_finite() && c_r > 0.0, "c_r > 0");
        check(
            "c_m",
            c_m,
            !(c_m.is_finite() && c_r.is_finite()) || c_m > c_r,
            "c_m > c_r",
        );
        check("s", s, s.is_finite() && s >= 0.0, "s >= 0");
        if !violations.is_empty() {
            return Err(Error::OutOfDomain(violations));
        }
        Ok(Params {
            alpha,
            c_m,
            c_r,
            delta: c_m - c_r,
            s,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_m(&self) -> f64 {
        self.c_m
    }

    pub fn c_r(&self) -> f64 {
        self.c_r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `s = 0` is admitted as the limit of a positive subsidy.
    pub fn is_boundary(&self) -> bool {
        self.s == 0.0
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Params::new(alpha, self.c_m, self.c_r, self.s)
    }

    /// The raw map form accepted by [`validate_params`].
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        [
            ("alpha", self.alpha),
            ("c_m", self.c_m),
            ("c_r", self.c_r),
            ("s", self.s),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Builds [`Params`] from a name→value map, reporting every violated
/// constraint at once. A `delta` entry, if present, is ignored and recomputed.
pub fn validate_params(raw: &BTreeMap<String, f64>) -> Result<Params> {
    let get = |k: &str| {
        raw.get(k)
            .copied()
            .ok_or_else(|| Error::MissingParam(k.to_string()))
    };
    Params::new(get("alpha")?, get("c_m")?, get("c_r")?, get("s")?)
}

/// Prices, subsidies and transfer price chosen under one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum DecisionSet {
    M {
        p_m: f64,
        p_r: f64,
        w: f64,
        b_m: f64,
    },
    R {
        p_m: f64,
        p_r: f64,
        w: f64,
        b_r: f64,
        t: f64,
    },
    MR {
        p_m: f64,
        p_r: f64,
        w: f64,
        b_m: f64,
        b_r: f64,
        t: f64,
    },
}

impl DecisionSet {
    pub fn zeros(model: ModelId) -> Self {
        match model {
            ModelId::M => DecisionSet::M {
                p_m: 0.0,
                p_r: 0.0,
                w: 0.0,
                b_m: 0.0,
            },
            ModelId::R => DecisionSet::R {
                p_m: 0.0,
                p_r: 0.0,
                w: 0.0,
                b_r: 0.0,
                t: 0.0,
            },
            ModelId::MR => DecisionSet::MR {
                p_m: 0.0,
                p_r: 0.0,
                w: 0.0,
                b_m: 0.0,
                b_r: 0.0,
                t: 0.0,
            },
        }
    }

    /// Builds a decision set from values listed in [`decision_fields`] order.
    pub fn from_values(model: ModelId, values: &[f64]) -> Result<Self> {
        let fields = decision_fields(model);
        if values.len() != fields.len() {
            return Err(Error::Config(format!(
                "model {model} takes {} decision values, got {}",
                fields.len(),
                values.len()
            )));
        }
        let mut d = DecisionSet::zeros(model);
        for (f, v) in fields.iter().zip(values) {
            d.set(*f, *v)?;
        }
        Ok(d)
    }

    pub fn model(&self) -> ModelId {
        match self {
            DecisionSet::M { .. } => ModelId::M,
            DecisionSet::R { .. } => ModelId::R,
            DecisionSet::MR { .. } => ModelId::MR,
        }
    }

    #[inline]
    pub fn get(&self, field: Field) -> Option<f64> {
        use Field::*;
        match (*self, field) {
            (DecisionSet::M { p_m, .. }, DirectPrice)
            | (DecisionSet::R { p_m, .. }, DirectPrice)
            | (DecisionSet::MR { p_m, .. }, DirectPrice) => Some(p_m),
            (DecisionSet::M { p_r, .. }, RetailPrice)
            | (DecisionSet::R { p_r, .. }, RetailPrice)
            | (DecisionSet::MR { p_r, .. }, RetailPrice) => Some(p_r),
            (DecisionSet::M { w, .. }, Wholesale)
            | (DecisionSet::R { w, .. }, Wholesale)
            | (DecisionSet::MR { w, .. }, Wholesale) => Some(w),
            (DecisionSet::M { b_m, .. }, ManufacturerSubsidy)
            | (DecisionSet::MR { b_m, .. }, ManufacturerSubsidy) => Some(b_m),
            (DecisionSet::R { b_r, .. }, RetailerSubsidy)
            | (DecisionSet::MR { b_r, .. }, RetailerSubsidy) => Some(b_r),
            (DecisionSet::R { t, .. }, Transfer) | (DecisionSet::MR { t, .. }, Transfer) => Some(t),
            _ => None,
        }
    }

    #[inline]
    pub fn set(&mut self, field: Field, value: f64) -> Result<()> {
        use Field::*;
        let model = self.model();
        let slot = match (self, field) {
            (DecisionSet::M { p_m, .. }, DirectPrice)
            | (DecisionSet::R { p_m, .. }, DirectPrice)
            | (DecisionSet::MR { p_m, .. }, DirectPrice) => p_m,
            (DecisionSet::M { p_r, .. }, RetailPrice)
            | (DecisionSet::R { p_r, .. }, RetailPrice)
            | (DecisionSet::MR { p_r, .. }, RetailPrice) => p_r,
            (DecisionSet::M { w, .. }, Wholesale)
            | (DecisionSet::R { w, .. }, Wholesale)
            | (DecisionSet::MR { w, .. }, Wholesale) => w,
            (DecisionSet::M { b_m, .. }, ManufacturerSubsidy)
            | (DecisionSet::MR { b_m, .. }, ManufacturerSubsidy) => b_m,
            (DecisionSet::R { b_r, .. }, RetailerSubsidy)
            | (DecisionSet::MR { b_r, .. }, RetailerSubsidy) => b_r,
            (DecisionSet::R { t, .. }, Transfer) | (DecisionSet::MR { t, .. }, Transfer) => t,
            _ => return Err(Error::NoSuchField(field, model)),
        };
        *slot = value;
        Ok(())
    }

    /// Values in [`decision_fields`] order.
    pub fn values(&self) -> Vec<f64> {
        self.iter().map(|(_, v)| v).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Field, f64)> + '_ {
        decision_fields(self.model())
            .iter()
            .map(move |f| (*f, self.get(*f).expect("field belongs to model")))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|(_, v)| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(alpha: f64, c_m: f64, c_r: f64, s: f64) -> BTreeMap<String, f64> {
        [("alpha", alpha), ("c_m", c_m), ("c_r", c_r), ("s", s)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    #[test]
    fn delta_is_recomputed() {
        let p = validate_params(&raw(0.9, 0.15, 0.12, 0.02)).unwrap();
        assert!((p.delta() - 0.03).abs() < 1e-15);
        let p = validate_params(&raw(0.7, 1.2, 1.0, 0.1)).unwrap();
        assert!((p.delta() - 0.2).abs() < 1e-15);

        let mut m = raw(0.7, 1.2, 1.0, 0.1);
        m.insert("delta".into(), 99.0);
        assert!((validate_params(&m).unwrap().delta() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn all_violations_reported_together() {
        let err = validate_params(&raw(1.2, 1.0, 2.0, 0.1)).unwrap_err();
        let Error::OutOfDomain(v) = err else {
            panic!("expected OutOfDomain, got {err:?}")
        };
        let names: Vec<_> = v.iter().map(|x| x.constraint.as_str()).collect();
        assert_eq!(names, ["0 < alpha < 1", "c_m > c_r"]);
    }

    #[test]
    fn missing_and_nan_inputs() {
        let mut m = raw(0.5, 1.0, 0.5, 0.1);
        m.remove("s");
        assert_eq!(
            validate_params(&m).unwrap_err(),
            Error::MissingParam("s".into())
        );
        assert!(Params::new(f64::NAN, 1.0, 0.5, 0.1).is_err());
        assert!(Params::new(0.5, 1.0, 0.5, -0.1).is_err());
        assert!(Params::new(0.5, 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn zero_subsidy_is_boundary() {
        assert!(Params::new(0.5, 1.0, 0.5, 0.0).unwrap().is_boundary());
        assert!(!Params::new(0.5, 1.0, 0.5, 0.1).unwrap().is_boundary());
    }

    #[test]
    fn field_orders() {
        let names = |m| {
            decision_fields(m)
                .iter()
                .map(|f| f.name())
                .collect::<Vec<_>>()
        };
        assert_eq!(names(ModelId::M), ["p_m", "p_r", "w", "b_m"]);
        assert_eq!(names(ModelId::R), ["p_m", "p_r", "w", "b_r", "t"]);
        assert_eq!(names(ModelId::MR).len(), 6);
        for m in ModelId::ALL {
            let f = decision_fields(m);
            let mut sorted = f.to_vec();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), f.len());
            assert_eq!(DecisionSet::zeros(m).values().len(), f.len());
        }
    }

    #[test]
    fn get_set_round_trip() {
        let mut d = DecisionSet::from_values(ModelId::R, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(d.get(Field::Transfer), Some(5.0));
        assert_eq!(d.get(Field::ManufacturerSubsidy), None);
        assert!(d.set(Field::ManufacturerSubsidy, 1.0).is_err());
        d.set(Field::RetailerSubsidy, -1.0).unwrap();
        assert_eq!(d.values(), [1.0, 2.0, 3.0, -1.0, 5.0]);
        assert!(DecisionSet::from_values(ModelId::M, &[1.0]).is_err());
    }

    #[test]
    fn serde_shape() {
        let d = DecisionSet::from_values(ModelId::M, &[0.5, 0.75, 0.25, 0.125]).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"model":"M","p_m":0.5,"p_r":0.75,"w":0.25,"b_m":0.125}"#);
        let back: DecisionSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn model_parsing() {
        assert_eq!("mr".parse::<ModelId>().unwrap(), ModelId::MR);
        assert_eq!("M".parse::<ModelId>().unwrap(), ModelId::M);
        assert!("x".parse::<ModelId>().is_err());
    }
}
