//! A dynamical model: either a bare subshift or an interval map with its coding.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::maps::MapModel;
use crate::symbolic::SubshiftSpec;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Shift(SubshiftSpec),
    Map(MapModel),
}

impl Model {
    pub fn coding(&self) -> &SubshiftSpec {
        match self {
            Model::Shift(s) => s,
            Model::Map(m) => m.coding(),
        }
    }

    pub fn as_map(&self) -> Option<&MapModel> {
        match self {
            Model::Shift(_) => None,
            Model::Map(m) => Some(m),
        }
    }

    pub fn require_map(&self) -> Result<&MapModel> {
        self.as_map()
            .ok_or_else(|| Error::InvalidArgument("this operation needs an interval-map model".into()))
    }

    /// Name used in reports.
    pub fn label(&self) -> String {
        match self {
            Model::Shift(s) => format!("subshift(N={})", s.alphabet_size()),
            Model::Map(m) => serde_json::to_string(m).unwrap_or_default(),
        }
    }
}

impl From<SubshiftSpec> for Model {
    fn from(s: SubshiftSpec) -> Self {
        Model::Shift(s)
    }
}

impl From<MapModel> for Model {
    fn from(m: MapModel) -> Self {
        Model::Map(m)
    }
}

/// `{"kind":"subshift","N":..,"A":..}` or any map kind; a bare `{"N","A"}` object is a subshift.
impl Serialize for Model {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Model::Map(m) => m.serialize(s),
            Model::Shift(shift) => {
                let mut v = serde_json::to_value(shift).map_err(serde::ser::Error::custom)?;
                if let Value::Object(map) = &mut v {
                    map.insert("kind".into(), Value::String("subshift".into()));
                }
                v.serialize(s)
            }
        }
    }
}

impl<'de> Deserialize<'de> for Model {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut v = Value::deserialize(d)?;
        let kind = v.get("kind").and_then(Value::as_str).map(str::to_owned);
        match kind.as_deref() {
            None | Some("subshift") => {
                if let Value::Object(map) = &mut v {
                    map.remove("kind");
                }
                serde_json::from_value(v).map(Model::Shift).map_err(D::Error::custom)
            }
            Some(_) => serde_json::from_value(v).map(Model::Map).map_err(D::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::build_cookie_cutter;

    #[test]
    fn json_forms() {
        let m: Model = serde_json::from_str(r#"{"kind":"subshift","N":2,"A":[[1,1],[1,0]]}"#).unwrap();
        assert_eq!(m.coding(), &SubshiftSpec::golden_mean());
        let bare: Model = serde_json::from_str(r#"{"N":2,"A":[[1,1],[1,0]]}"#).unwrap();
        assert_eq!(bare, m);
        let back: Model = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        let c: Model = serde_json::from_str(r#"{"kind":"cookie_cutter"}"#).unwrap();
        assert_eq!(c, Model::Map(build_cookie_cutter()));
        assert!(serde_json::from_str::<Model>(r#"{"kind":"moebius"}"#).is_err());
    }
}
