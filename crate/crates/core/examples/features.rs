//! Text statistics and account/pair feature vectors.

use std::collections::HashSet;

use ban_evasion::corpus::{generate_synthetic, SynthConfig};
use ban_evasion::features::{account_features, pair_features, AccountView, FeatureConfig};
use ban_evasion::pairing::corpus_first_pairs;
use ban_evasion::textstats::{
    cosine, embed, jaccard, liwc_profile, normalized_levenshtein, sentiment, tokenize, Lexicon, SentimentLexicon,
    TrigramEmbedder,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = "I think the article is biased and we should fix it";
    let b = "i think this article is so biased, we must fix it!";
    let (ta, tb) = (tokenize(a), tokenize(b));
    let sa: HashSet<_> = ta.iter().cloned().collect();
    let sb: HashSet<_> = tb.iter().cloned().collect();
    let ea = embed(&[a], &TrigramEmbedder)?;
    let eb = embed(&[b], &TrigramEmbedder)?;
    println!("levenshtein(norm)  {:.3}", normalized_levenshtein("WikiFan88", "WikiFan89"));
    println!("token jaccard      {:.3}", jaccard(&sa, &sb));
    println!("embedding cosine   {:.3}", cosine(&ea.values, &eb.values)?);
    println!("sentiment          {:.3}", sentiment(&ta, &SentimentLexicon::demo()));
    let profile = liwc_profile(&ta, &Lexicon::demo());
    for (cat, v) in profile.categories.iter().zip(&profile.values).take(4) {
        println!("  liwc {cat:<12} {v:.3}");
    }

    let generated = generate_synthetic(&SynthConfig {
        n_groups: 50,
        ..SynthConfig::default()
    })?;
    let corpus = &generated.corpus;
    let (_, _, first) = corpus_first_pairs(corpus);
    let pair = first.first().ok_or("no evasion pairs")?;
    let config = FeatureConfig::default();

    let parent = AccountView::from_corpus(corpus, &pair.parent_id)?;
    let child = AccountView::from_corpus(corpus, &pair.child_id)?;
    println!("\naccount features of {}", pair.parent_id);
    let fv = account_features(parent, &config)?;
    for (n, v) in fv.names.iter().zip(&fv.values).take(8) {
        println!("  {n:<28} {v:.4}");
    }
    println!("pair features {} -> {}", pair.parent_id, pair.child_id);
    let pv = pair_features(parent, child, &FeatureConfig { k_limit: Some(3), ..config })?;
    for (n, v) in pv.names.iter().zip(&pv.values).filter(|(n, _)| !n.contains("_dow") && !n.contains("_hour")) {
        println!("  {n:<28} {v:.4}");
    }
    Ok(())
}
