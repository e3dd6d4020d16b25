//! Encode a value onto the link slots of a network, recover it from any R
//! packets, and catch a corrupted packet.

use byzcap::capgraph::NetworkSpec;
use byzcap::rscode::{check_consistency, encode, solve, Consistency, DataValue, Registry, Symbol};
use rand::SeedableRng;

fn main() -> anyhow::Result<()> {
    let net = NetworkSpec::uniform(4, 1, 2);
    let registry = Registry::new(&net)?;
    let points: Vec<_> = registry.all_points().into_values().collect();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let value = DataValue::random(&mut rng, 0, 3, 4);
    let packets = encode(&value, &points)?;
    println!("{} packets over {} links", packets.len(), 12);

    let back = solve(&packets[5..8], 3)?;
    assert_eq!(back, value);
    println!("recovered from packets 5..8");

    let mut bad = packets[..5].to_vec();
    bad[4].payload[1] += Symbol(0x0101);
    match check_consistency(&bad, 3)? {
        Consistency::Consistent(_) => println!("corruption went unnoticed"),
        Consistency::Inconsistent => println!("corruption detected among 5 packets"),
    }
    Ok(())
}
