//! Samples one project's weather and price curves for scenario #0 and
//! writes them as CSV (day, Tp, Rf, Ws, prices), ready for plotting.
//!
//! `cargo run --release --example sample_exogenous -- [seed] [out.csv]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use resflow::exogenous::{curve_len, sample_year, BaselineParams};
use resflow::scenario::builtin;

fn main() -> resflow::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let params = builtin(0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let curves = sample_year(
        &BaselineParams::default(),
        params.start_day,
        curve_len(&params),
        &mut rng,
    );
    match args.next() {
        Some(path) => {
            curves.save_csv(path.as_ref())?;
            println!("wrote {} days to {path}", curves.len());
        }
        None => curves.write_csv(std::io::stdout())?,
    }
    Ok(())
}
