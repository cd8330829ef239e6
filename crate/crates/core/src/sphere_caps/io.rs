use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{BumpProfile, CapSystem, CellShape};
use crate::error::{LabError, Result};

/// Little-endian f64 array, base64 encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackedF64 {
    pub len: usize,
    pub data: String,
}

impl PackedF64 {
    pub fn pack(values: &[f64]) -> Self {
        let mut bytes = Vec::with_capacity(values.len() * 8);
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        PackedF64 {
            len: values.len(),
            data: STANDARD.encode(bytes),
        }
    }

    pub fn unpack(&self) -> Result<Vec<f64>> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| LabError::InvalidArgument(format!("base64: {e}")))?;
        if bytes.len() != self.len * 8 {
            return Err(LabError::Mismatch(format!(
                "packed array: {} bytes for {} values",
                bytes.len(),
                self.len
            )));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapSystemDoc {
    pub n: usize,
    pub scale: f64,
    pub profile: BumpProfile,
    pub cells: Vec<CellShape>,
    /// Centres, `n` coordinates per cap.
    pub centers: PackedF64,
    pub radii: PackedF64,
    pub supports: PackedF64,
    pub parent_map: Option<Vec<usize>>,
    pub parent_scale: Option<f64>,
    pub quadrature_nodes: usize,
    pub max_frequency: f64,
}

impl CapSystemDoc {
    pub fn from_system(sys: &CapSystem) -> Self {
        let centers: Vec<f64> = sys
            .caps
            .iter()
            .flat_map(|c| c.center[..sys.n].to_vec())
            .collect();
        CapSystemDoc {
            n: sys.n,
            scale: sys.scale,
            profile: sys.profile,
            cells: sys.caps.iter().map(|c| c.cell).collect(),
            centers: PackedF64::pack(&centers),
            radii: PackedF64::pack(&sys.caps.iter().map(|c| c.radius).collect::<Vec<_>>()),
            supports: PackedF64::pack(&sys.caps.iter().map(|c| c.support).collect::<Vec<_>>()),
            parent_map: sys.parent_map.clone(),
            parent_scale: sys.parent_scale,
            quadrature_nodes: sys.quadrature.nodes.len(),
            max_frequency: sys.quadrature.max_frequency,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
