//! Substring search over a small collection with the FM-index, and the
//! byte-level extensions that constrained n-gram decoding walks.
//!
//! cargo run --example fm_index

use dyngr::decode::FMIndex;

fn main() -> anyhow::Result<()> {
    let docs = [
        ("rivers", "the nile is the longest river in africa"),
        ("mountains", "everest is the highest mountain on earth"),
        ("deserts", "the sahara is the largest hot desert in africa"),
    ];
    let fm = FMIndex::build(docs.iter().map(|(id, text)| (id.to_string(), text.as_bytes().to_vec())))?;
    println!("{} documents, {} indexed bytes", fm.n_docs(), fm.text_len());

    for pattern in ["the", "africa", "est", "river in", "nile is the highest"] {
        let hits = fm.locate(pattern.as_bytes(), 10)?;
        let at: Vec<String> = hits.iter().map(|o| format!("{}@{}", fm.doc_id(o.doc), o.offset)).collect();
        println!("{:<22} count={} {}", format!("{pattern:?}"), fm.count(pattern.as_bytes())?, at.join(" "));
    }

    // what may follow "the " anywhere in the collection
    let next = fm.allowed_extensions(b"the ");
    let shown: Vec<String> = next.iter().map(|(b, n)| format!("{:?}x{n}", *b as char)).collect();
    println!("after \"the \": {}", shown.join(" "));

    let bytes = fm.to_bytes();
    assert_eq!(FMIndex::from_bytes(&bytes)?.count(b"is the")?, 3);
    println!("serialized size {} bytes", bytes.len());
    Ok(())
}
