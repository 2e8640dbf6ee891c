use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub subcategories: Vec<String>,
}

/// Two-level scene taxonomy, `{categories: [{name, subcategories}]}` on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneTaxonomy {
    pub categories: Vec<Category>,
}

fn unique<'a>(names: impl Iterator<Item = &'a String>) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(format!("duplicate taxonomy name `{n}`"));
        }
    }
    Ok(())
}

impl SceneTaxonomy {
    pub fn validate(&self) -> Result<(), String> {
        if self.categories.is_empty() {
            return Err("taxonomy has no categories".into());
        }
        unique(self.categories.iter().map(|c| &c.name))?;
        for c in &self.categories {
            if c.subcategories.is_empty() {
                return Err(format!("category `{}` has no subcategories", c.name));
            }
            unique(c.subcategories.iter())?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let t: Self = serde_json::from_str(text).map_err(|e| format!("taxonomy: {e}"))?;
        t.validate()?;
        Ok(t)
    }

    /// Six top-level indoor categories with a handful of subcategories each.
    pub fn builtin() -> Self {
        let table: [(&str, &[&str]); 6] = [
            ("transportation", &["airport terminal", "train station concourse", "bus depot", "parking garage"]),
            ("workplaces/offices", &["open-plan office", "meeting room", "co-working loft", "reception lobby"]),
            ("commercial/retail", &["grocery store", "clothing boutique", "bookstore", "electronics shop"]),
            ("industrial/utility", &["warehouse", "machine shop", "boiler room", "loading bay"]),
            ("leisure/hospitality", &["hotel lobby", "restaurant dining room", "cafe", "gym"]),
            ("residential", &["living room", "bedroom", "kitchen", "home study"]),
        ];
        Self {
            categories: table
                .iter()
                .map(|(name, subs)| Category {
                    name: name.to_string(),
                    subcategories: subs.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        }
    }
}

/// What to ask the world generator for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub category: String,
    pub subcategory: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
}

impl SceneSpec {
    pub fn validate(&self, taxonomy: &SceneTaxonomy) -> Result<(), String> {
        let cat = taxonomy
            .categories
            .iter()
            .find(|c| c.name == self.category)
            .ok_or_else(|| format!("unknown category `{}`", self.category))?;
        if !cat.subcategories.contains(&self.subcategory) {
            return Err(format!("`{}` is not a subcategory of `{}`", self.subcategory, self.category));
        }
        Ok(())
    }
}

/// Draws a category uniformly, then a subcategory uniformly within it.
pub fn sample_scene_type(taxonomy: &SceneTaxonomy, seed: u64) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cat = &taxonomy.categories[rng.random_range(0..taxonomy.categories.len())];
    let sub = &cat.subcategories[rng.random_range(0..cat.subcategories.len())];
    (cat.name.clone(), sub.clone())
}

/// Scene request for a sampled type. The description carries the scene
/// seed so distinct seeds give distinct layouts.
pub fn scene_spec_for(taxonomy: &SceneTaxonomy, seed: u64) -> SceneSpec {
    let (category, subcategory) = sample_scene_type(taxonomy, seed);
    let description = format!("A {subcategory} interior ({category}), layout {seed:016x}.");
    SceneSpec { category, subcategory, description, image_ref: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tax(counts: &[usize]) -> SceneTaxonomy {
        SceneTaxonomy {
            categories: counts
                .iter()
                .enumerate()
                .map(|(i, &n)| Category {
                    name: format!("c{i}"),
                    subcategories: (0..n).map(|j| format!("c{i}s{j}")).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn single_pair_always_drawn() {
        let t = tax(&[1]);
        for seed in 0..20 {
            assert_eq!(sample_scene_type(&t, seed), ("c0".to_string(), "c0s0".to_string()));
        }
    }

    #[test]
    fn two_step_sampling_ignores_subcategory_counts() {
        let t = tax(&[1, 9]);
        let n = 10_000;
        let first = (0..n).filter(|s| sample_scene_type(&t, *s).0 == "c0").count();
        // Flat sampling over subcategories would give 0.1 here.
        assert!((first as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn builtin_is_valid() {
        let t = SceneTaxonomy::builtin();
        t.validate().unwrap();
        assert_eq!(t.categories.len(), 6);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(SceneTaxonomy::from_json(&json).unwrap(), t);
    }

    #[test]
    fn validation_errors() {
        assert!(tax(&[]).validate().is_err());
        assert!(tax(&[0]).validate().is_err());
        let mut t = tax(&[2, 2]);
        t.categories[1].name = "c0".into();
        assert!(t.validate().is_err());
    }

    #[test]
    fn spec_belongs_to_taxonomy() {
        let t = SceneTaxonomy::builtin();
        let s = scene_spec_for(&t, 42);
        s.validate(&t).unwrap();
        assert_eq!(s, scene_spec_for(&t, 42));
        let bad = SceneSpec { subcategory: "nope".into(), ..s };
        assert!(bad.validate(&t).is_err());
    }
}
