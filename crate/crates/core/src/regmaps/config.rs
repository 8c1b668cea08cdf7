use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlib::read_matrix;
use crate::schemes::{AssociationScheme, BlockRing};

use super::{Partition, RegMap, TargetSpec};

/// `[regmap]` config section. File paths are resolved against the config
/// file's directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegMapConfig {
    /// identity | inflation | mask | scheme | shrinkage | nystrom
    pub kind: String,
    pub epsilon: Option<f64>,
    #[serde(rename = "T_file")]
    pub t_file: Option<String>,
    #[serde(rename = "L_file")]
    pub l_file: Option<String>,
    /// Contiguous block sizes, an alternative to `L_file` for block masks.
    pub block_sizes: Option<Vec<usize>>,
    /// Class matrix of a scheme.
    pub scheme_file: Option<String>,
    /// Adjacency of a distance-regular graph, an alternative to `scheme_file`.
    pub graph_file: Option<String>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    /// Shrinkage target: band | scheme | nystrom.
    pub target: Option<String>,
    pub iota: Option<usize>,
    /// 1-based indices.
    pub partition: Option<Vec<usize>>,
}

fn need<T: Copy>(v: Option<T>, key: &str, kind: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("regmap kind `{kind}` needs `{key}`")))
}

impl RegMapConfig {
    pub fn build(&self, base: &Path) -> Result<RegMap> {
        let kind = self.kind.as_str();
        match kind {
            "identity" => Ok(RegMap::Identity),
            "inflation" => {
                let eps = need(self.epsilon, "epsilon", kind)?;
                let t = self
                    .t_file
                    .as_ref()
                    .ok_or_else(|| Error::Config("regmap kind `inflation` needs `T_file`".into()))?;
                RegMap::inflation(eps, read_matrix(&base.join(t))?)
            }
            "mask" => match (&self.l_file, &self.block_sizes) {
                (Some(f), None) => RegMap::mask(read_matrix(&base.join(f))?),
                (None, Some(sizes)) => Ok(RegMap::block_mask(&BlockRing::contiguous(sizes)?)),
                _ => Err(Error::Config(
                    "regmap kind `mask` needs exactly one of `L_file`, `block_sizes`".into(),
                )),
            },
            "scheme" => Ok(RegMap::scheme(self.scheme(base)?)),
            "shrinkage" => {
                let eps1 = need(self.eps1, "eps1", kind)?;
                let eps2 = need(self.eps2, "eps2", kind)?;
                let target = match self.target.as_deref().unwrap_or("band") {
                    "band" => TargetSpec::MaskBand {
                        iota: need(self.iota, "iota", kind)?,
                    },
                    "scheme" => TargetSpec::SchemeTarget(self.scheme(base)?),
                    "nystrom" => TargetSpec::NystromTarget(self.partition()?),
                    "ml" => {
                        return Err(Error::Unsupported(
                            "maximum-likelihood shrinkage targets".into(),
                        ))
                    }
                    other => {
                        return Err(Error::Config(format!("unknown shrinkage target `{other}`")))
                    }
                };
                RegMap::shrinkage(eps1, eps2, target)
            }
            "nystrom" => Ok(RegMap::nystrom(self.partition()?)),
            other => Err(Error::Config(format!("unknown regmap kind `{other}`"))),
        }
    }

    fn scheme(&self, base: &Path) -> Result<Arc<AssociationScheme>> {
        let s = match (&self.scheme_file, &self.graph_file) {
            (Some(f), None) => AssociationScheme::from_class_matrix(&read_matrix(&base.join(f))?)?,
            (None, Some(f)) => {
                AssociationScheme::from_distance_regular_graph(&read_matrix(&base.join(f))?)?
            }
            _ => {
                return Err(Error::Config(
                    "scheme maps need exactly one of `scheme_file`, `graph_file`".into(),
                ))
            }
        };
        Ok(Arc::new(s))
    }

    fn partition(&self) -> Result<Partition> {
        let p = self
            .partition
            .as_ref()
            .ok_or_else(|| Error::Config("nystrom maps need `partition`".into()))?;
        Partition::from_one_based(p)
    }
}
