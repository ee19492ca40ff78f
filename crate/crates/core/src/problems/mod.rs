//! Concrete cost models and scenario generators.

mod formation;
mod markowitz;
mod prices;
mod toy;
mod transform;

pub use formation::{
    formation_cost, formation_initial_state, formation_models, pair_equilibrium_distance,
    FormationCost, FormationParams,
};
pub use markowitz::{markowitz_cost, MarkowitzCost, PortfolioProfile, Window};
pub use prices::{
    estimate_profile, load_prices_csv, parse_prices_csv, synthesize_prices,
    synthesize_prices_with, PriceSeries, SynthesisRanges,
};
pub use toy::{example_one_game, example_one_transformed_game, Linear, Quadratic};
pub use transform::{transform_cost, MonotoneTransform, TransformSpec, TransformedCost};
