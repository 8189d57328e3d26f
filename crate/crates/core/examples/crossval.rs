//! Cross-validated DJINN scores for a CSV with a named preset.
//!
//! ```text
//! cargo run --release -p djinn --example crossval -- data/iris.csv iris
//! ```

use djinn::data::{load_csv, make_splits};
use djinn::ensemble::InitScheme;
use djinn::experiment::evaluate_scheme;
use djinn::metrics::EvalReport;
use djinn::presets::preset_by_name;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [path, preset] = args.as_slice() else {
        return Err("usage: crossval <file.csv> <preset>".into());
    };
    let preset = preset_by_name(preset)?;
    let header = std::fs::read_to_string(path)?
        .lines()
        .next()
        .unwrap_or_default()
        .to_string();
    let target = header.rsplit(',').next().unwrap_or_default().trim().to_string();
    let data = load_csv(path, &[target.as_str()], preset.task)?;

    let plan = make_splits(data.n_samples(), 5, 0.2, 0)?;
    let start = std::time::Instant::now();
    let run = evaluate_scheme(
        "djinn",
        &data,
        &plan,
        &preset.ensemble_config(),
        InitScheme::Djinn,
        0,
        false,
    )?;
    print!(
        "{}",
        EvalReport::new(data.task(), vec![run.scores], "djinn")?.to_table()
    );
    println!("{:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
