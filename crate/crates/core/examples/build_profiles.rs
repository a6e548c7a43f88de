//! Regenerates `data/profiles/*.tsv` from the sample texts and stopword lists.
//!
//!     cargo run -p tweetcast --example build_profiles

use std::fs;
use std::path::Path;

use tweetcast::nlp::language::{LanguageProfile, PROFILE_SIZE};

fn main() -> std::io::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    for code in ["en", "es", "fr", "de", "it", "pt", "nl"] {
        let sample = fs::read_to_string(data.join("lang").join(format!("{code}.txt")))?;
        let stop: Vec<String> = fs::read_to_string(data.join("stopwords").join(format!("{code}.txt")))?
            .lines()
            .map(str::to_string)
            .collect();
        let profile = LanguageProfile::from_sample(code, &sample, &stop, PROFILE_SIZE);
        fs::write(data.join("profiles").join(format!("{code}.tsv")), profile.to_tsv())?;
        println!("{code}: {} trigrams, {} stopwords", profile.trigrams.len(), profile.stopwords.len());
    }
    Ok(())
}
