use super::ipa::{Phone, PhoneSeq};

fn r_colored(vowel: &str, next: &str) -> Option<&'static str> {
    if !matches!(next, "ɹ" | "r") {
        return None;
    }
    match vowel {
        "ə" => Some("ɚ"),
        "ɜ" => Some("ɝ"),
        _ => None,
    }
}

/// Rewrites schwa + r as `ɚ` and open-mid central vowel + r as `ɝ`.
///
/// Single left-to-right pass; a rewritten pair is consumed whole, so
/// `ə ɹ ə ɹ` becomes `ɚ ɚ`. The output contains no rewrite site, which makes
/// the function idempotent.
pub fn normalize_rhotics(seq: &PhoneSeq) -> PhoneSeq {
    let phones = seq.phones();
    let mut out = Vec::with_capacity(phones.len());
    let mut i = 0;
    while i < phones.len() {
        if let Some(next) = phones.get(i + 1) {
            if let Some(merged) = r_colored(phones[i].as_str(), next.as_str()) {
                out.push(Phone::from_trusted(merged));
                i += 2;
                continue;
            }
        }
        out.push(phones[i].clone());
        i += 1;
    }
    PhoneSeq::new(out)
}
