//! Train a profile HMM on one simulated year group, score its members
//! against a uniform background and pick the representative.
//!
//! cargo run --release --example profile_hmm -- [SEED]

use mutarate::align::ScoringScheme;
use mutarate::dataset::SequenceRecord;
use mutarate::msa::{progressive_align, resolve_ambiguities};
use mutarate::phmm::{
    baum_welch, init_from_msa, length_sweep, log_odds_score, select_representative,
    TrainingConfig,
};
use mutarate::simulate::{simulate, SimulationConfig};

fn main() -> anyhow::Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let data = simulate(
        &SimulationConfig {
            per_year: 8,
            length: 150,
            ..SimulationConfig::default()
        },
        seed,
    )?;
    let group: Vec<_> = data.records.into_iter().filter(|r| r.year == Some(2007)).collect();

    let msa = resolve_ambiguities(&progressive_align(&group, &ScoringScheme::default())?);
    let cfg = TrainingConfig::default();
    let h0 = init_from_msa(&msa, &cfg)?;
    let seqs: Vec<String> = msa.rows.iter().map(|r| r.ungapped()).collect();
    let refs: Vec<&str> = seqs.iter().map(String::as_str).collect();
    let trained = baum_welch(&h0, &refs, &cfg)?;
    println!(
        "model length {}, {} iterations, log-likelihood {:.3} -> {:.3}",
        trained.model.length,
        trained.iterations,
        trained.ll_trace[0],
        trained.ll_trace.last().unwrap()
    );

    let scores: Vec<(String, f64)> = msa
        .rows
        .iter()
        .zip(&refs)
        .map(|(row, s)| Ok((row.label.clone(), log_odds_score(&trained.model, s)?)))
        .collect::<mutarate::Result<_>>()?;
    for (label, s) in &scores {
        println!("  {label:<8} {s:>9.3}");
    }
    println!("representative: {}", scores[select_representative(&scores)?].0);

    let resolved: Vec<SequenceRecord> = msa
        .rows
        .iter()
        .map(|r| SequenceRecord::new(r.label.clone(), r.ungapped()))
        .collect();
    let sweep = length_sweep(&msa, &resolved, &[50, 100, 140], &cfg)?;
    print!("{}", sweep.to_tsv());
    Ok(())
}
