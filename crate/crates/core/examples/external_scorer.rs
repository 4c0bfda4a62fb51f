//! A model behind the line protocol. Here the "model" is an oracle served
//! from a thread over TCP; a real one would be a Python process speaking the
//! same JSON lines (`extern:cmd:python serve.py` in the pipeline config).
//!
//! ```text
//! -> {"type":"hello"}
//! <- {"type":"vocab","size":..,"eos_id":0,"tokenizer_tag":"sqlmark-word-v1"}
//! -> {"type":"score","example_id":"q1","prefix":[..],"candidates":[..]}
//! <- {"type":"scores","example_id":"q1","scores":[..]}
//! ```

use std::io::BufReader;
use std::net::TcpListener;
use std::path::Path;
use std::time::Duration;

use sqlmark::annotate::AnnotatedInput;
use sqlmark::decode::remote::serve;
use sqlmark::decode::{beam_search, BeamConfig, Lexicon, OracleScorer, PrefixTrie, RemoteScorer, ScoreContext, Vocabulary};
use sqlmark::pipeline::load_schemas;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let schemas = load_schemas(&fixtures.join("tables.json"), None)?;
    let cs = schemas.iter().find(|s| s.db_id == "concert_singer").unwrap();

    let gold = "SELECT stadium.Name, COUNT(*) FROM concert JOIN stadium ON concert.Stadium_ID = stadium.Stadium_ID GROUP BY concert.Stadium_ID";
    let mut vocab = Vocabulary::new();
    vocab.add_schema(cs);
    vocab.add_text(gold);
    let target = vocab.encode(gold)?;

    let listener = TcpListener::bind("127.0.0.1:0")?;
    let endpoint = format!("tcp:{}", listener.local_addr()?);
    let (eos, size, tag) = (vocab.eos(), vocab.len(), vocab.tag().to_string());
    let server = std::thread::spawn(move || -> std::io::Result<()> {
        let (stream, _) = listener.accept()?;
        stream.set_nodelay(true)?;
        let mut model = OracleScorer::new(target, eos, size);
        serve(&mut model, &tag, BufReader::new(stream.try_clone()?), stream)
    });

    let mut remote = RemoteScorer::connect(&endpoint, Duration::from_secs(5))?;
    remote.check_vocabulary(&vocab)?;
    println!("connected to {endpoint}: {:?}", remote.handshake_info());

    let trie = PrefixTrie::build(cs, &vocab, false)?;
    let lexicon = Lexicon::new(&trie, &vocab, false);
    let source = AnnotatedInput::new();
    let ctx = ScoreContext { example_id: "concert/0", source: &source };
    let hyps = beam_search(&mut remote, &ctx, &lexicon, &BeamConfig::default())?;
    println!("{}", vocab.decode(&hyps[0].tokens));

    drop(remote);
    server.join().unwrap()?;
    Ok(())
}
