//! Test-only reference implementations and fixture builders.
//!
//! The oracle module is deliberately written from the textbook definitions
//! and shares no code with the production paths it is used to check.

pub mod fixtures {
    //! Seeded construction of valid signed pay-to-pubkey-hash transactions.

    use rand::Rng;

    pub use crate::sigcrypto::{random_keypair, random_nonce};

    use crate::hashes::Hash256;
    use crate::script::{p2pkh_condition, sig_script};
    use crate::sigcrypto::{
        encode_der, is_low_s, negate_s, secp256k1_order, sign_input, CryptoProvider, KeyPair,
    };
    use crate::tx::{OutPoint, Transaction, TxInput, TxOutput};

    /// A signed transaction together with everything needed to re-sign or
    /// verify it without a chain.
    pub struct SignedFixture {
        pub tx: Transaction,
        pub keypair: KeyPair,
        /// Claiming condition of the (synthetic) funded output.
        pub script_pubkey: Vec<u8>,
    }

    /// Random single-input P2PKH transaction, signed, with the signature
    /// normalized to low-s.
    pub fn random_p2pkh(rng: &mut impl Rng, provider: &dyn CryptoProvider) -> SignedFixture {
        let keypair = random_keypair(rng, provider);
        let script_pubkey = p2pkh_condition(&keypair.address_hash).encode();

        let mut funding_txid = [0u8; 32];
        rng.fill(&mut funding_txid);
        let mut recipient = [0u8; 20];
        rng.fill(&mut recipient);

        let mut tx = Transaction {
            version: 1,
            inputs: vec![TxInput {
                previous: OutPoint {
                    txid: Hash256(funding_txid),
                    index: rng.gen_range(0..16),
                },
                script_sig: Vec::new(),
                sequence: 0xFFFF_FFFF,
            }],
            outputs: vec![TxOutput {
                value: rng.gen_range(1_000..100_000_000),
                script_pubkey: p2pkh_condition(&recipient).encode(),
            }],
            locktime: 0,
        };

        let nonce = random_nonce(rng);
        let mut sig = sign_input(&tx, 0, &script_pubkey, &keypair, provider, &nonce)
            .expect("fixture signing cannot fail");
        if !is_low_s(&sig, secp256k1_order()) {
            sig = negate_s(&sig, secp256k1_order());
        }
        tx.inputs[0].script_sig = sig_script(&encode_der(&sig, true), &keypair.pubkey).encode();

        SignedFixture {
            tx,
            keypair,
            script_pubkey,
        }
    }
}

pub mod ecdsa_oracle {
    //! Straight-line affine ECDSA over secp256k1: big-integer arithmetic via
    //! `num-bigint`, modular inversion via Fermat's little theorem, plain
    //! double-and-add scalar multiplication.

    use std::sync::OnceLock;

    use num_bigint::BigUint;

    struct Curve {
        p: BigUint,
        n: BigUint,
        gx: BigUint,
        gy: BigUint,
        seven: BigUint,
    }

    fn curve() -> &'static Curve {
        static CURVE: OnceLock<Curve> = OnceLock::new();
        CURVE.get_or_init(|| Curve {
            p: hex_uint("FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F"),
            n: hex_uint("FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141"),
            gx: hex_uint("79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798"),
            gy: hex_uint("483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8"),
            seven: BigUint::from(7u8),
        })
    }

    fn hex_uint(s: &str) -> BigUint {
        BigUint::parse_bytes(s.as_bytes(), 16).expect("constant parses")
    }

    /// Affine point; `None` is the point at infinity.
    type Point = Option<(BigUint, BigUint)>;

    fn inv_mod(a: &BigUint, m: &BigUint) -> BigUint {
        // m is prime throughout this module.
        a.modpow(&(m - BigUint::from(2u8)), m)
    }

    fn sub_mod(a: &BigUint, b: &BigUint, m: &BigUint) -> BigUint {
        ((a + m) - (b % m)) % m
    }

    fn point_add(a: &Point, b: &Point) -> Point {
        let c = curve();
        let p = &c.p;
        let (ax, ay) = match a {
            None => return b.clone(),
            Some(xy) => xy,
        };
        let (bx, by) = match b {
            None => return a.clone(),
            Some(xy) => xy,
        };

        let lambda = if ax == bx {
            if (ay + by) % p == BigUint::from(0u8) {
                return None;
            }
            // Tangent slope: 3x² / 2y.
            let num = (BigUint::from(3u8) * ax * ax) % p;
            let den = inv_mod(&((BigUint::from(2u8) * ay) % p), p);
            (num * den) % p
        } else {
            let num = sub_mod(by, ay, p);
            let den = inv_mod(&sub_mod(bx, ax, p), p);
            (num * den) % p
        };

        let x3 = sub_mod(&sub_mod(&((&lambda * &lambda) % p), ax, p), bx, p);
        let y3 = sub_mod(&((lambda * sub_mod(ax, &x3, p)) % p), ay, p);
        Some((x3, y3))
    }

    fn scalar_mul(k: &BigUint, base: &Point) -> Point {
        let mut acc: Point = None;
        for i in (0..k.bits()).rev() {
            acc = point_add(&acc, &acc);
            if k.bit(i) {
                acc = point_add(&acc, base);
            }
        }
        acc
    }

    fn generator() -> Point {
        let c = curve();
        Some((c.gx.clone(), c.gy.clone()))
    }

    fn on_curve(x: &BigUint, y: &BigUint) -> bool {
        let c = curve();
        if x >= &c.p || y >= &c.p {
            return false;
        }
        (y * y) % &c.p == (x * x * x + &c.seven) % &c.p
    }

    fn parse_pubkey(pubkey: &[u8]) -> Option<(BigUint, BigUint)> {
        if pubkey.len() != 65 || pubkey[0] != 0x04 {
            return None;
        }
        let x = BigUint::from_bytes_be(&pubkey[1..33]);
        let y = BigUint::from_bytes_be(&pubkey[33..65]);
        on_curve(&x, &y).then_some((x, y))
    }

    fn to_32_bytes(v: &BigUint) -> [u8; 32] {
        let raw = v.to_bytes_be();
        let mut out = [0u8; 32];
        out[32 - raw.len()..].copy_from_slice(&raw);
        out
    }

    /// 65-byte uncompressed public key for a secret scalar, or None if the
    /// scalar is out of range.
    pub fn derive_pubkey(privkey: &[u8; 32]) -> Option<Vec<u8>> {
        let c = curve();
        let d = BigUint::from_bytes_be(privkey);
        if d.bits() == 0 || d >= c.n {
            return None;
        }
        let (x, y) = scalar_mul(&d, &generator())?;
        let mut out = vec![0x04];
        out.extend_from_slice(&to_32_bytes(&x));
        out.extend_from_slice(&to_32_bytes(&y));
        Some(out)
    }

    /// Textbook ECDSA signing with an explicit nonce.
    pub fn sign(
        privkey: &[u8; 32],
        digest: &[u8; 32],
        nonce: &BigUint,
    ) -> Option<(BigUint, BigUint)> {
        let c = curve();
        let d = BigUint::from_bytes_be(privkey);
        if d.bits() == 0 || d >= c.n || nonce.bits() == 0 || nonce >= &c.n {
            return None;
        }
        let (rx, _) = scalar_mul(nonce, &generator())?;
        let r = rx % &c.n;
        if r.bits() == 0 {
            return None;
        }
        let z = BigUint::from_bytes_be(digest) % &c.n;
        let s = (inv_mod(nonce, &c.n) * ((z + &r * d) % &c.n)) % &c.n;
        if s.bits() == 0 {
            return None;
        }
        Some((r, s))
    }

    /// Textbook ECDSA verification.
    pub fn verify(pubkey: &[u8], digest: &[u8; 32], r: &BigUint, s: &BigUint) -> bool {
        let c = curve();
        let Some(q) = parse_pubkey(pubkey) else {
            return false;
        };
        if r.bits() == 0 || r >= &c.n || s.bits() == 0 || s >= &c.n {
            return false;
        }
        let z = BigUint::from_bytes_be(digest) % &c.n;
        let s_inv = inv_mod(s, &c.n);
        let u1 = (z * &s_inv) % &c.n;
        let u2 = (r * &s_inv) % &c.n;
        let point = point_add(&scalar_mul(&u1, &generator()), &scalar_mul(&u2, &Some(q)));
        match point {
            None => false,
            Some((x, _)) => &(x % &c.n) == r,
        }
    }

}
