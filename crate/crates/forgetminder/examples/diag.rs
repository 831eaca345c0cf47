use forgetminder::eval::best_permutation_accuracy;
use forgetminder::gibbs::{train, TrainConfig};
use forgetminder::synth::{gen_block_corpus, BlockCorpusSpec};

fn main() {
    let spec = BlockCorpusSpec {
        k: 4,
        p: 3,
        n_human_words: 50,
        n_object_words: 50,
        clips_per_block: 15,
        present_prob: 0.7,
        order_biases: vec![(0, 1, 0.9), (2, 3, 0.1)],
    };
    let (corpus, truth) = gen_block_corpus(&spec, 200, 41).expect("block corpus");
    let truth_z: Vec<Vec<usize>> = truth.iter().map(|t| t.z1.clone()).collect();

    println!("word-only, varying MH dose:");
    for props in [5usize, 25, 100] {
        for iters in [200usize, 400] {
            let mut cfg = TrainConfig::new(4, 3);
            cfg.iters = iters;
            cfg.burn_in = 0;
            cfg.seed = 17;
            cfg.warmup_iters = usize::MAX;
            cfg.mh_proposals_per_doc = props;
            let (model, trace) = train(&corpus, &cfg).expect("train");
            let pred: Vec<Vec<usize>> = model.states.iter().map(|s| s.z1.clone()).collect();
            let (acc, _) = best_permutation_accuracy(&pred, &truth_z, 4).expect("perm");
            let last = trace.last().unwrap();
            println!(
                "  props {props:3} iters {iters:4}  acc {acc:.3}  mh_acc {:.3}  loglik {:.0}",
                last.mh_accept_rate, last.loglik
            );
        }
    }
}
