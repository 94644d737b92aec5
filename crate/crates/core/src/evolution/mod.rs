//! Variation (subtree crossover, point mutation) and survival.

pub mod survival;
pub mod variation;

pub use survival::{
    crowding_survival, eps_lexicase_survival, mad, median, random_survival, tournament_survival, SurvivalContext,
    SurvivalMethod,
};
pub use variation::{make_offspring, point_mutation, subtree_crossover, Offspring, Origin, VariationParams};
