//! Reading, writing and generating scenario files.

use qhist::sample::random_scenario;
use qhist::scenario::{parse_scenario, resolve, serialize_scenario, ScenarioError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BROKEN: &str = r#"{
  "format": 1,
  "name": "broken",
  "subsystem_dims": [2, 2],
  "initial_state": ["up_z", "up_z"],
  "times": ["t0", "t1"],
  "observers": [{"name": "O", "measurements": [{"time": "t1", "observable": "sigma_z@3"}]}]
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = include_str!("repeated_x.json");
    let scenario = parse_scenario(text.as_bytes())?;
    // omitted evolutions come back explicitly
    println!("{}", String::from_utf8(serialize_scenario(&scenario))?);

    match parse_scenario(BROKEN.as_bytes()) {
        Err(e @ ScenarioError::Invalid { .. }) => println!("rejected: {e}"),
        other => println!("unexpected: {other:?}"),
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let generated = random_scenario(&mut rng);
    let back = parse_scenario(&serialize_scenario(&generated))?;
    println!(
        "\ngenerated `{}`: dims {:?}, {} observers, round trip identical: {}",
        generated.name,
        generated.subsystem_dims,
        generated.observers.len(),
        back == generated
    );
    for o in resolve(&back)? {
        println!("  {}: {} histories", o.name(), o.family().histories().len());
    }
    Ok(())
}
