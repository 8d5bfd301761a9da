use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;

pub type BuildingId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Residential,
    Industrial,
    Educational,
    Commercial,
    Restauration,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Residential,
        Category::Industrial,
        Category::Educational,
        Category::Commercial,
        Category::Restauration,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Residential => "residential",
            Self::Industrial => "industrial",
            Self::Educational => "educational",
            Self::Commercial => "commercial",
            Self::Restauration => "restauration",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownCategory(pub String);

impl FromStr for Category {
    type Err = UnknownCategory;

    /// Case-insensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == lower)
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

/// A place agents can occupy. Occupancy itself is tracked by the world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: BuildingId,
    pub category: Category,
    /// Exterior rings of the footprint polygons, planar coordinates.
    pub footprint: Vec<Vec<[f64; 2]>>,
    pub centroid: [f64; 2],
}

impl Building {
    pub fn distance_sq(&self, other: &Building) -> f64 {
        let dx = self.centroid[0] - other.centroid[0];
        let dy = self.centroid[1] - other.centroid[1];
        dx * dx + dy * dy
    }
}

/// Building counts for a generated town.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutCounts {
    pub residential: usize,
    pub industrial: usize,
    pub educational: usize,
    pub commercial: usize,
    pub restauration: usize,
}

impl Default for LayoutCounts {
    /// Roughly the building stock of a 2,000-inhabitant village.
    fn default() -> Self {
        Self {
            residential: 620,
            industrial: 25,
            educational: 2,
            commercial: 12,
            restauration: 5,
        }
    }
}

/// Square footprints on a jittered grid with shuffled categories.
pub fn synthetic_layout(counts: &LayoutCounts, seed: u64) -> Vec<Building> {
    let mut rng = rng_from_seed(seed);
    let mut categories: Vec<Category> = [
        (Category::Residential, counts.residential),
        (Category::Industrial, counts.industrial),
        (Category::Educational, counts.educational),
        (Category::Commercial, counts.commercial),
        (Category::Restauration, counts.restauration),
    ]
    .into_iter()
    .flat_map(|(c, n)| std::iter::repeat_n(c, n))
    .collect();
    categories.shuffle(&mut rng);

    let side = (categories.len() as f64).sqrt().ceil().max(1.0) as usize;
    const SPACING: f64 = 40.0;
    categories
        .into_iter()
        .enumerate()
        .map(|(idx, category)| {
            let half = match category {
                Category::Residential => rng.random_range(5.0..9.0),
                _ => rng.random_range(10.0..18.0),
            };
            let cx = (idx % side) as f64 * SPACING + rng.random_range(-5.0..5.0);
            let cy = (idx / side) as f64 * SPACING + rng.random_range(-5.0..5.0);
            let ring = vec![
                [cx - half, cy - half],
                [cx + half, cy - half],
                [cx + half, cy + half],
                [cx - half, cy + half],
                [cx - half, cy - half],
            ];
            Building {
                id: idx as BuildingId,
                category,
                footprint: vec![ring],
                centroid: [cx, cy],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories_parse_case_insensitively() {
        assert_eq!("Residential".parse::<Category>(), Ok(Category::Residential));
        assert_eq!("RESTAURATION".parse::<Category>(), Ok(Category::Restauration));
        assert!("cinema".parse::<Category>().is_err());
    }

    #[test]
    fn layout_matches_counts_and_seed() {
        let counts = LayoutCounts::default();
        let a = synthetic_layout(&counts, 3);
        assert_eq!(a.len(), 664);
        let schools = a.iter().filter(|b| b.category == Category::Educational).count();
        assert_eq!(schools, 2);
        assert_eq!(a, synthetic_layout(&counts, 3));
        assert_ne!(a, synthetic_layout(&counts, 4));
        assert!(a.iter().enumerate().all(|(i, b)| b.id as usize == i));
    }
}
