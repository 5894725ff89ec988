//! Curatorial assessment of a candidate artwork and the reconstruction
//! fidelity it calls for.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialMeaningLink {
    /// The material conditions carry no meaning of their own.
    None,
    /// The meaning depends on the material conditions.
    Essential,
}

/// Selection criteria (a)–(e) plus the material/meaning relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    /// (a) art-historical relevance
    pub relevance: Level,
    /// (b) vulnerability and accessibility
    pub vulnerability: Level,
    /// (c)
    pub documentation_available: bool,
    /// (d)
    pub technically_viable: bool,
    /// (e)
    pub conceptually_suitable: bool,
    pub material_meaning_link: MaterialMeaningLink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryFidelity {
    Structural,
    Photogrammetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureFidelity {
    Flat,
    SensorDerived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentFidelity {
    None,
    Panorama,
    Modeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FidelityPlan {
    pub geometry: GeometryFidelity,
    pub textures: TextureFidelity,
    pub environment: EnvironmentFidelity,
}

impl FidelityPlan {
    /// Photogrammetric geometry always comes with sensor-derived textures.
    pub fn is_consistent(&self) -> bool {
        self.geometry != GeometryFidelity::Photogrammetric
            || self.textures == TextureFidelity::SensorDerived
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CurationError {
    #[error("insufficient basis for virtualization: criterion ({criterion}) {field} is not met")]
    InsufficientBasis {
        criterion: char,
        field: &'static str,
    },
}

/// Chooses a reconstruction fidelity.
///
/// Criteria (c), (d) and (e) gate virtualization outright and are checked in
/// that order. Past the gate, only the material/meaning relation matters:
/// when the material carries no meaning the basic structure with flat
/// textures suffices, otherwise the work is captured photogrammetrically.
/// The surroundings are always kept as a panorama.
pub fn recommend_fidelity(assessment: &AssessmentRecord) -> Result<FidelityPlan, CurationError> {
    let gates = [
        (
            'c',
            "documentation_available",
            assessment.documentation_available,
        ),
        ('d', "technically_viable", assessment.technically_viable),
        (
            'e',
            "conceptually_suitable",
            assessment.conceptually_suitable,
        ),
    ];
    if let Some(&(criterion, field, _)) = gates.iter().find(|(_, _, ok)| !ok) {
        return Err(CurationError::InsufficientBasis { criterion, field });
    }
    let (geometry, textures) = match assessment.material_meaning_link {
        MaterialMeaningLink::None => (GeometryFidelity::Structural, TextureFidelity::Flat),
        MaterialMeaningLink::Essential => (
            GeometryFidelity::Photogrammetric,
            TextureFidelity::SensorDerived,
        ),
    };
    Ok(FidelityPlan {
        geometry,
        textures,
        environment: EnvironmentFidelity::Panorama,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(link: MaterialMeaningLink) -> AssessmentRecord {
        AssessmentRecord {
            relevance: Level::High,
            vulnerability: Level::High,
            documentation_available: true,
            technically_viable: true,
            conceptually_suitable: true,
            material_meaning_link: link,
        }
    }

    #[test]
    fn no_link_gives_structural() {
        let plan = recommend_fidelity(&record(MaterialMeaningLink::None)).unwrap();
        assert_eq!(plan.geometry, GeometryFidelity::Structural);
        assert_eq!(plan.textures, TextureFidelity::Flat);
        assert_eq!(plan.environment, EnvironmentFidelity::Panorama);
    }

    #[test]
    fn essential_link_gives_photogrammetric() {
        let plan = recommend_fidelity(&record(MaterialMeaningLink::Essential)).unwrap();
        assert_eq!(plan.geometry, GeometryFidelity::Photogrammetric);
        assert_eq!(plan.textures, TextureFidelity::SensorDerived);
        assert!(plan.is_consistent());
    }

    #[test]
    fn missing_documentation_names_criterion_c() {
        let mut r = record(MaterialMeaningLink::None);
        r.documentation_available = false;
        r.technically_viable = false;
        let err = recommend_fidelity(&r).unwrap_err();
        assert_eq!(
            err,
            CurationError::InsufficientBasis {
                criterion: 'c',
                field: "documentation_available"
            }
        );
        assert!(err
            .to_string()
            .contains("insufficient basis for virtualization"));
        assert!(err.to_string().contains("(c)"));
    }
}
