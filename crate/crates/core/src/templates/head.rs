use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::rasterize_into;
use crate::corpus::BBox;
use crate::error::{Error, Result};
use crate::net::{Activation, Loss};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Reg,
    Pix,
}

impl HeadKind {
    pub fn tag(self) -> &'static str {
        match self {
            HeadKind::Reg => "REG",
            HeadKind::Pix => "PIX",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Reg => "reg",
            HeadKind::Pix => "pix",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HeadRegistry::default().get(s).map(|h| h.kind())
    }
}

/// Output layer, loss and training targets for one prediction head.
pub trait Head: Send + Sync {
    fn kind(&self) -> HeadKind;

    fn output_width(&self, grid_size: usize) -> usize;

    fn output_activation(&self) -> Activation;

    fn loss(&self) -> Loss;

    /// Writes the target row for one object box.
    fn write_target(&self, object: &BBox, grid_size: usize, out: &mut [f64]);

    fn targets(&self, objects: &[&BBox], grid_size: usize) -> Array2<f64> {
        let width = self.output_width(grid_size);
        let mut y = Array2::zeros((objects.len(), width));
        for (mut row, b) in y.rows_mut().into_iter().zip(objects) {
            self.write_target(b, grid_size, row.as_slice_mut().expect("standard layout"));
        }
        y
    }
}

/// Object center and half-extents, linear output, squared error.
pub struct RegHead;

impl Head for RegHead {
    fn kind(&self) -> HeadKind {
        HeadKind::Reg
    }

    fn output_width(&self, _: usize) -> usize {
        4
    }

    fn output_activation(&self) -> Activation {
        Activation::Linear
    }

    fn loss(&self) -> Loss {
        Loss::Mse
    }

    fn write_target(&self, object: &BBox, _: usize, out: &mut [f64]) {
        out.copy_from_slice(&object.to_array());
    }
}

/// Per-cell object membership on an `M x M` grid, sigmoid output, cross-entropy.
pub struct PixHead;

impl Head for PixHead {
    fn kind(&self) -> HeadKind {
        HeadKind::Pix
    }

    fn output_width(&self, grid_size: usize) -> usize {
        grid_size * grid_size
    }

    fn output_activation(&self) -> Activation {
        Activation::SigmoidElementwise
    }

    fn loss(&self) -> Loss {
        Loss::BceWithLogits
    }

    fn write_target(&self, object: &BBox, grid_size: usize, out: &mut [f64]) {
        rasterize_into(object, grid_size, out);
    }
}

/// Prediction heads by name.
pub struct HeadRegistry {
    heads: BTreeMap<&'static str, Arc<dyn Head>>,
}

impl Default for HeadRegistry {
    fn default() -> Self {
        let mut reg = Self {
            heads: BTreeMap::new(),
        };
        reg.register(Arc::new(RegHead));
        reg.register(Arc::new(PixHead));
        reg
    }
}

impl HeadRegistry {
    pub fn register(&mut self, head: Arc<dyn Head>) {
        self.heads.insert(head.kind().name(), head);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Head>> {
        self.heads
            .get(name.to_ascii_lowercase().as_str())
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "head",
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn for_kind(&self, kind: HeadKind) -> Result<Arc<dyn Head>> {
        self.get(kind.name())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.heads.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        let reg = HeadRegistry::default();
        assert_eq!(reg.names(), vec!["pix", "reg"]);
        assert_eq!("PIX".parse::<HeadKind>().unwrap(), HeadKind::Pix);
        assert!(matches!(reg.get("cnn"), Err(Error::UnknownStrategy { .. })));
    }

    #[test]
    fn target_widths() {
        let b = BBox::new(0.5, 0.5, 0.5, 0.5);
        let reg = RegHead.targets(&[&b], 15);
        assert_eq!(reg.row(0).to_vec(), vec![0.5, 0.5, 0.5, 0.5]);
        let pix = PixHead.targets(&[&b, &b], 15);
        assert_eq!(pix.dim(), (2, 225));
        assert!(pix.iter().all(|&v| v == 1.0));
    }
}
