//! Scratch calibration bench for the reference corpus and attack
//! defaults. Run with --release; prints per-cell summaries.

use harness::{
    attack_cell, gen_corpus, select_attack_samples, split_corpus, train_cell, AttackSpec,
    AttackVariant, CellSpec, ClassifierName, CorpusConfig, ExtractorSpec,
};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let corpus_cfg = CorpusConfig {
        seed: 42,
        ..CorpusConfig::default()
    };
    let corpus = gen_corpus(&corpus_cfg).unwrap();
    let e_totals: Vec<u64> = corpus.graphs.iter().map(|g| g.e_total()).collect();
    println!(
        "corpus: {} graphs, E_total min/mean/max = {}/{:.0}/{}  ({:.1?})",
        corpus.graphs.len(),
        e_totals.iter().min().unwrap(),
        e_totals.iter().sum::<u64>() as f64 / e_totals.len() as f64,
        e_totals.iter().max().unwrap(),
        t0.elapsed()
    );
    let (train_ids, test_ids) = split_corpus(&corpus, 0.7, 42);

    let cells = [
        (ExtractorSpec::Mamadroid { level: fcg_core::Granularity::Family }, ClassifierName::Knn1),
        (ExtractorSpec::Mamadroid { level: fcg_core::Granularity::Family }, ClassifierName::Mlp),
        (ExtractorSpec::Mamadroid { level: fcg_core::Granularity::Package }, ClassifierName::Knn1),
        (ExtractorSpec::Mamadroid { level: fcg_core::Granularity::Package }, ClassifierName::Mlp),
    ];
    for (extractor, classifier) in cells {
        let spec = CellSpec {
            extractor,
            classifier: Some(classifier),
        };
        let t1 = Instant::now();
        let cell = train_cell(&corpus, &train_ids, &test_ids, &spec, 42).unwrap();
        let samples =
            select_attack_samples(&corpus, &test_ids, &cell.model, 10, 42).unwrap();
        println!(
            "{}: acc {:.3}, {} samples eligible ({:.1?} to train)",
            cell.name,
            cell.heldout_accuracy,
            samples.len(),
            t1.elapsed()
        );
        let attack = AttackSpec {
            variant: AttackVariant::Apoem,
            ..AttackSpec::default()
        };
        let t2 = Instant::now();
        let results = attack_cell(&samples, &cell, &attack, 42).unwrap();
        let evaded = results
            .iter()
            .filter(|r| r.status == apoem::AttackStatus::Evaded)
            .count();
        let mean_apr: f64 = results
            .iter()
            .filter(|r| r.status == apoem::AttackStatus::Evaded)
            .map(|r| r.apr)
            .sum::<f64>()
            / evaded.max(1) as f64;
        let mean_ir: f64 = results.iter().map(|r| r.ir as f64).sum::<f64>() / results.len() as f64;
        let mean_gens: f64 =
            results.iter().map(|r| r.generations as f64).sum::<f64>() / results.len() as f64;
        println!(
            "  attack: {}/{} evaded, mean apr {:.3}, mean ir {:.0}, mean gens {:.1} ({:.1?})",
            evaded,
            results.len(),
            mean_apr,
            mean_ir,
            mean_gens,
            t2.elapsed()
        );
        for r in &results {
            println!(
                "    {}: {:?} gens {} ir {} apr {:.3} best_gran {:?}",
                r.app_id,
                r.status,
                r.generations,
                r.ir,
                r.apr,
                r.best.as_ref().map(|b| b.granularity)
            );
        }
    }
    println!("total {:.1?}", t0.elapsed());
}
