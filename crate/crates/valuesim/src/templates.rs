//! Versioned prompt templates shipped with the harness.
//!
//! Templates are embedded at compile time and pinned by SHA-256 digest so a
//! run manifest can prove which prompt text produced its records. Placeholder
//! substitution is strict: a missing placeholder is a build error, never a
//! silently unfilled prompt.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const BACKSTORY: &str = include_str!("../templates/backstory.txt");
pub const COGNITIVE: &str = include_str!("../templates/cognitive.txt");
pub const AFFECTIVE: &str = include_str!("../templates/affective.txt");
pub const BEHAVIORAL: &str = include_str!("../templates/behavioral.txt");
pub const COORDINATOR: &str = include_str!("../templates/coordinator.txt");
pub const FULL_INFO: &str = include_str!("../templates/full_info.txt");
pub const RAG: &str = include_str!("../templates/rag.txt");

/// Pinned digests of the shipped template files. `verify_checksums` fails the
/// run if any embedded template drifts from these.
pub const CHECKSUMS: &[(&str, &str)] = &[
    (
        "backstory",
        "61615ee068bf86b78c8ac103eb3d3a06f29aa9cace95fc67dfdfa246c160af19",
    ),
    (
        "cognitive",
        "609a74ee95ab034b575311fa187be07faf4f671259d8071f5fa417a3f171520b",
    ),
    (
        "affective",
        "3f0e4cd623767715eccba6377dce5fe9f8122d6dccc324dbabc13b0724bf727c",
    ),
    (
        "behavioral",
        "a7014d7c9c084071d2a544382248550e02360a2ec23a383a3703a2812867f8d6",
    ),
    (
        "coordinator",
        "0557bf88b3c17a2732d86c4f472b87169c5528728a63679e557f6e510b1359fd",
    ),
    (
        "full_info",
        "c84e769d1aef5cff7358facb137e14af902f57415ff2afbb386cb05ab07b1734",
    ),
    (
        "rag",
        "c38ad3938cdd6a3f5845236f0133c74eb3c108eb40eba800b38f54c60b624af7",
    ),
];

pub fn template_by_name(name: &str) -> Option<&'static str> {
    match name {
        "backstory" => Some(BACKSTORY),
        "cognitive" => Some(COGNITIVE),
        "affective" => Some(AFFECTIVE),
        "behavioral" => Some(BEHAVIORAL),
        "coordinator" => Some(COORDINATOR),
        "full_info" => Some(FULL_INFO),
        "rag" => Some(RAG),
        _ => None,
    }
}

pub fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}

/// Verify every embedded template against its pinned digest.
pub fn verify_checksums() -> Result<()> {
    for (name, expected) in CHECKSUMS {
        let text = template_by_name(name)
            .ok_or_else(|| Error::Template(format!("unknown template '{name}'")))?;
        let actual = sha256_hex(text);
        if actual != *expected {
            return Err(Error::Template(format!(
                "template '{name}' digest mismatch: expected {expected}, got {actual}"
            )));
        }
    }
    Ok(())
}

/// Replace `{placeholder}` tokens in `template`. Every placeholder must occur
/// in the template exactly once; values are inserted verbatim and never
/// re-scanned.
pub fn fill(template: &str, substitutions: &[(&str, &str)]) -> Result<String> {
    // Locate every placeholder in the original template first, so values that
    // happen to contain `{...}` sequences are never themselves substituted.
    let mut sites: Vec<(usize, usize, &str)> = Vec::with_capacity(substitutions.len());
    for (name, value) in substitutions {
        let token = format!("{{{name}}}");
        let occurrences = template.matches(&token).count();
        if occurrences == 0 {
            return Err(Error::Template(format!(
                "template has no placeholder '{token}'"
            )));
        }
        if occurrences > 1 {
            return Err(Error::Template(format!(
                "placeholder '{token}' appears {occurrences} times, expected once"
            )));
        }
        let start = template.find(&token).expect("counted above");
        sites.push((start, token.len(), value));
    }
    sites.sort_unstable_by_key(|&(start, ..)| start);

    let mut out = String::with_capacity(template.len());
    let mut cursor = 0;
    for (start, token_len, value) in sites {
        out.push_str(&template[cursor..start]);
        out.push_str(value);
        cursor = start + token_len;
    }
    out.push_str(&template[cursor..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksums_match_embedded_templates() {
        verify_checksums().unwrap();
    }

    #[test]
    fn fill_substitutes_each_placeholder_once() {
        let out = fill("a {x} b {y}", &[("x", "1"), ("y", "2")]).unwrap();
        assert_eq!(out, "a 1 b 2");
    }

    #[test]
    fn fill_rejects_missing_placeholder() {
        let err = fill("no placeholders here", &[("x", "1")]).unwrap_err();
        assert!(matches!(err, Error::Template(_)));
    }

    #[test]
    fn fill_does_not_rescan_substituted_values() {
        let out = fill("{a} {b}", &[("a", "{b}"), ("b", "2")]).unwrap();
        assert_eq!(out, "{b} 2");
    }

    #[test]
    fn backstory_template_carries_all_ten_instructions() {
        for i in 1..=10 {
            assert!(
                BACKSTORY.contains(&format!("\n{i}. ")),
                "instruction {i} missing"
            );
        }
        assert!(BACKSTORY.contains("YOU MUST INCLUDE EVERY SINGLE DATA POINT"));
        assert!(BACKSTORY.contains("Use second-person format throughout"));
    }

    #[test]
    fn perspective_templates_differ_only_in_tutorial_block() {
        // Split each template around the tutorial body; the wrappers must be
        // byte-identical across the three perspectives.
        let parts: Vec<(&str, &str)> = [COGNITIVE, AFFECTIVE, BEHAVIORAL]
            .iter()
            .map(|t| {
                let head_end = t.find("Consider these").unwrap();
                let tail_start = t.find("\n\nUser Profile:").unwrap();
                (&t[..head_end], &t[tail_start..])
            })
            .collect();
        assert_eq!(parts[0].0, parts[1].0);
        assert_eq!(parts[0].0, parts[2].0);
        assert_eq!(parts[0].1, parts[1].1);
        assert_eq!(parts[0].1, parts[2].1);
    }
}
