use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{GgdError, Result};

/// Weight of the agreement regularizer over a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaKind {
    Constant {
        value: f64,
    },
    /// `sin(pi t / 2T)`, rising from 0 to 1.
    SinAnneal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// `t` counts epochs, so `T` is the number of epochs.
    #[default]
    Epoch,
    /// `t` counts optimizer steps over the whole run.
    Batch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct LambdaSchedule {
    pub kind: LambdaKind,
    pub granularity: Granularity,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindTag {
    Constant,
    SinAnneal,
}

/// JSON form: `{"kind": "constant", "value": 0.5}` or `{"kind": "sin_anneal"}`,
/// each with an optional `"granularity"`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default)]
    granularity: Granularity,
}

impl TryFrom<RawSchedule> for LambdaSchedule {
    type Error = String;

    fn try_from(raw: RawSchedule) -> Result<Self, String> {
        let kind = match (raw.kind, raw.value) {
            (KindTag::Constant, Some(value)) => LambdaKind::Constant { value },
            (KindTag::Constant, None) => return Err("constant lambda needs a value".into()),
            (KindTag::SinAnneal, None) => LambdaKind::SinAnneal,
            (KindTag::SinAnneal, Some(_)) => return Err("sin_anneal takes no value".into()),
        };
        Ok(LambdaSchedule {
            kind,
            granularity: raw.granularity,
        })
    }
}

impl From<LambdaSchedule> for RawSchedule {
    fn from(s: LambdaSchedule) -> Self {
        let (kind, value) = match s.kind {
            LambdaKind::Constant { value } => (KindTag::Constant, Some(value)),
            LambdaKind::SinAnneal => (KindTag::SinAnneal, None),
        };
        RawSchedule {
            kind,
            value,
            granularity: s.granularity,
        }
    }
}

impl LambdaSchedule {
    pub fn constant(value: f64) -> Self {
        LambdaSchedule {
            kind: LambdaKind::Constant { value },
            granularity: Granularity::Epoch,
        }
    }

    pub fn sin_anneal(granularity: Granularity) -> Self {
        LambdaSchedule {
            kind: LambdaKind::SinAnneal,
            granularity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let LambdaKind::Constant { value } = self.kind {
            if !(0.0..=1.0).contains(&value) {
                return Err(GgdError::Config(format!("constant lambda {value} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// `lambda_t` for `0 <= t <= horizon`.
pub fn lambda_value(schedule: &LambdaSchedule, t: usize, horizon: usize) -> Result<f64> {
    if horizon == 0 || t > horizon {
        return Err(GgdError::contract(format!(
            "schedule position {t} outside [0, {horizon}]"
        )));
    }
    Ok(match schedule.kind {
        LambdaKind::Constant { value } => value,
        LambdaKind::SinAnneal if t == horizon => 1.0,
        LambdaKind::SinAnneal => (FRAC_PI_2 * t as f64 / horizon as f64).sin(),
    })
}
