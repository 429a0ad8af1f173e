//! Cryptographic building blocks: identities, key agreement, derivations,
//! key wrapping, payload encryption, and message signatures.
//!
//! The primitives themselves (X25519, Ed25519, AES, HMAC, HKDF) come from
//! the RustCrypto crates; this module pins down how they are *composed* for
//! the protocol:
//!
//! * pairwise wrap keys: `HKDF-SHA256(salt = "", ikm = X25519(s, P), info =
//!   "strongvelope pairwise key")`, truncated to 16 bytes;
//! * per-recipient wrap IV: `HMAC-SHA256(key = master nonce, msg = recipient
//!   handle)`, truncated to 16 bytes;
//! * payload nonce: `HMAC-SHA256(key = master nonce, msg = "payload")`,
//!   truncated to 12 bytes;
//! * sender-key wrapping: AES-128-CBC without padding (inputs are always one
//!   or two whole key blocks);
//! * payloads: AES-128-CTR with a 12-byte nonce and a 32-bit big-endian
//!   block counter starting at zero;
//! * signatures: Ed25519 over `"strongvelopesig" || signed span`.
//!
//! Everything here is deterministic given its inputs; randomness only enters
//! through the explicit `generate` constructors, which take the caller's
//! RNG.

use hkdf::Hkdf;
use hmac::{Hmac, Mac};
use rand_core::CryptoRngCore;
use sha2::Sha256;
use thiserror::Error;

use aes::cipher::{block_padding::NoPadding, BlockDecryptMut, BlockEncryptMut, KeyIvInit, StreamCipher};
use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use x25519_dalek::{PublicKey, StaticSecret};

type Aes128CbcEnc = cbc::Encryptor<aes::Aes128>;
type Aes128CbcDec = cbc::Decryptor<aes::Aes128>;
type Aes128Ctr = ctr::Ctr32BE<aes::Aes128>;
type HmacSha256 = Hmac<Sha256>;

/// Domain-separation prefix for message signatures.
pub const SIGNATURE_MAGIC: &[u8; 15] = b"strongvelopesig";

/// HKDF context string for pairwise key derivation.
pub const PAIRWISE_INFO: &[u8; 25] = b"strongvelope pairwise key";

/// Sender keys are 128-bit AES keys.
pub const SENDER_KEY_LEN: usize = 16;

/// The per-message master nonce is 16 bytes.
pub const MASTER_NONCE_LEN: usize = 16;

/// CTR payload nonces are 12 bytes (the remaining 4 bytes of the counter
/// block are the block counter).
pub const PAYLOAD_NONCE_LEN: usize = 12;

/// Ed25519 signatures are 64 bytes.
pub const SIGNATURE_LEN: usize = 64;

/// User handles are 8 bytes.
pub const HANDLE_LEN: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("X25519 shared secret is all zeros; refusing to derive a key from a degenerate exchange")]
    WeakSharedSecret,
    #[error("sender-key block must be 16 or 32 bytes, got {0}")]
    BadKeyBlockLength(usize),
    #[error("participant handle must be exactly {HANDLE_LEN} bytes, got {0}")]
    BadHandleLength(usize),
    #[error("participant handle is not valid URL-safe base64: {0}")]
    BadHandleEncoding(String),
    #[error("master nonce must be exactly {MASTER_NONCE_LEN} bytes, got {0}")]
    BadNonceLength(usize),
}

/// An 8-byte participant handle.
///
/// On the wire this is the value of RECIPIENT, INC_PARTICIPANT and
/// EXC_PARTICIPANT records; user-facing APIs usually carry it as an 11-digit
/// URL-safe base64 string.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParticipantId([u8; HANDLE_LEN]);

impl ParticipantId {
    pub fn from_bytes(bytes: [u8; HANDLE_LEN]) -> ParticipantId {
        ParticipantId(bytes)
    }

    /// Parses a handle from a raw byte slice, which must be exactly 8 bytes.
    pub fn try_from_slice(bytes: &[u8]) -> Result<ParticipantId, CryptoError> {
        let arr: [u8; HANDLE_LEN] = bytes
            .try_into()
            .map_err(|_| CryptoError::BadHandleLength(bytes.len()))?;
        Ok(ParticipantId(arr))
    }

    /// Parses the user-facing form: URL-safe base64 (no padding) of the
    /// 8 raw bytes, e.g. `"me3456789xw"`.
    pub fn from_base64_handle(handle: &str) -> Result<ParticipantId, CryptoError> {
        let bytes = URL_SAFE_NO_PAD
            .decode(handle)
            .map_err(|e| CryptoError::BadHandleEncoding(e.to_string()))?;
        ParticipantId::try_from_slice(&bytes)
    }

    /// The user-facing base64 form of this handle.
    pub fn to_base64_handle(self) -> String {
        URL_SAFE_NO_PAD.encode(self.0)
    }

    pub fn as_bytes(&self) -> &[u8; HANDLE_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for ParticipantId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ParticipantId({})", hex::encode(self.0))
    }
}

impl std::fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

/// A 128-bit sender key. Debug output is redacted; use [`SenderKey::as_bytes`]
/// when bytes are genuinely needed.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SenderKey([u8; SENDER_KEY_LEN]);

impl SenderKey {
    pub fn generate(rng: &mut dyn CryptoRngCore) -> SenderKey {
        let mut bytes = [0u8; SENDER_KEY_LEN];
        rng.fill_bytes(&mut bytes);
        SenderKey(bytes)
    }

    pub fn from_bytes(bytes: [u8; SENDER_KEY_LEN]) -> SenderKey {
        SenderKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SENDER_KEY_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for SenderKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SenderKey(redacted)")
    }
}

/// The 16-byte master nonce carried in a message's NONCE record. All other
/// per-message nonces and IVs are derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MasterNonce([u8; MASTER_NONCE_LEN]);

impl MasterNonce {
    pub fn generate(rng: &mut dyn CryptoRngCore) -> MasterNonce {
        let mut bytes = [0u8; MASTER_NONCE_LEN];
        rng.fill_bytes(&mut bytes);
        MasterNonce(bytes)
    }

    pub fn from_bytes(bytes: [u8; MASTER_NONCE_LEN]) -> MasterNonce {
        MasterNonce(bytes)
    }

    pub fn try_from_slice(bytes: &[u8]) -> Result<MasterNonce, CryptoError> {
        let arr: [u8; MASTER_NONCE_LEN] = bytes
            .try_into()
            .map_err(|_| CryptoError::BadNonceLength(bytes.len()))?;
        Ok(MasterNonce(arr))
    }

    pub fn as_bytes(&self) -> &[u8; MASTER_NONCE_LEN] {
        &self.0
    }
}

/// A 128-bit pairwise wrap key derived from an X25519 exchange. Debug output
/// is redacted.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct PairwiseKey([u8; SENDER_KEY_LEN]);

impl PairwiseKey {
    pub fn from_bytes(bytes: [u8; SENDER_KEY_LEN]) -> PairwiseKey {
        PairwiseKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SENDER_KEY_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for PairwiseKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PairwiseKey(redacted)")
    }
}

/// Ed25519 identity used to sign outgoing messages.
pub struct SignKeyPair {
    signing: SigningKey,
}

impl SignKeyPair {
    pub fn generate(rng: &mut dyn CryptoRngCore) -> SignKeyPair {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        SignKeyPair::from_seed(seed)
    }

    pub fn from_seed(seed: [u8; 32]) -> SignKeyPair {
        SignKeyPair {
            signing: SigningKey::from_bytes(&seed),
        }
    }

    /// The 32-byte secret seed (what a client would keep in its keystore).
    pub fn seed(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    /// The 32-byte public verification key.
    pub fn public_bytes(&self) -> [u8; 32] {
        self.signing.verifying_key().to_bytes()
    }
}

impl Clone for SignKeyPair {
    fn clone(&self) -> SignKeyPair {
        SignKeyPair::from_seed(self.seed())
    }
}

impl std::fmt::Debug for SignKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SignKeyPair(pub {})", hex::encode(self.public_bytes()))
    }
}

/// X25519 identity used to derive pairwise wrap keys.
pub struct DhKeyPair {
    secret: StaticSecret,
}

impl DhKeyPair {
    pub fn generate(rng: &mut dyn CryptoRngCore) -> DhKeyPair {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        DhKeyPair::from_secret_bytes(seed)
    }

    /// Builds the key pair from 32 secret bytes (clamped per X25519).
    pub fn from_secret_bytes(bytes: [u8; 32]) -> DhKeyPair {
        DhKeyPair {
            secret: StaticSecret::from(bytes),
        }
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.secret.to_bytes()
    }

    pub fn public_bytes(&self) -> [u8; 32] {
        PublicKey::from(&self.secret).to_bytes()
    }
}

impl Clone for DhKeyPair {
    fn clone(&self) -> DhKeyPair {
        DhKeyPair::from_secret_bytes(self.secret.to_bytes())
    }
}

impl std::fmt::Debug for DhKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DhKeyPair(pub {})", hex::encode(self.public_bytes()))
    }
}

/// Result of unwrapping a KEYS record value: the sender's current key and,
/// when the record carried two blocks, the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnwrappedKeys {
    pub current: SenderKey,
    pub previous: Option<SenderKey>,
}

/// Derives the symmetric wrap key shared with one peer:
/// `HKDF-SHA256(salt = "", ikm = X25519(own secret, peer public), info =
/// "strongvelope pairwise key")[..16]`.
///
/// The exchange is rejected if it lands on the all-zero shared secret (peer
/// public key of low order), since that would let anyone derive the wrap key.
pub fn derive_pairwise_key(
    own: &DhKeyPair,
    peer_public: &[u8; 32],
) -> Result<PairwiseKey, CryptoError> {
    let shared = own.secret.diffie_hellman(&PublicKey::from(*peer_public));
    if shared.as_bytes() == &[0u8; 32] {
        return Err(CryptoError::WeakSharedSecret);
    }
    let hkdf = Hkdf::<Sha256>::new(None, shared.as_bytes());
    let mut okm = [0u8; SENDER_KEY_LEN];
    hkdf.expand(PAIRWISE_INFO, &mut okm)
        .expect("16 bytes is far below the HKDF-SHA256 output limit");
    Ok(PairwiseKey(okm))
}

/// Derives the CBC IV used to wrap keys for one recipient:
/// `HMAC-SHA256(key = master nonce, msg = recipient handle)[..16]`.
pub fn derive_recipient_iv(nonce: &MasterNonce, recipient: ParticipantId) -> [u8; 16] {
    let digest = hmac_sha256(nonce.as_bytes(), recipient.as_bytes());
    digest[..16].try_into().unwrap()
}

/// Derives the CTR nonce for the message payload:
/// `HMAC-SHA256(key = master nonce, msg = "payload")[..12]`.
pub fn derive_payload_nonce(nonce: &MasterNonce) -> [u8; PAYLOAD_NONCE_LEN] {
    let digest = hmac_sha256(nonce.as_bytes(), b"payload");
    digest[..PAYLOAD_NONCE_LEN].try_into().unwrap()
}

fn hmac_sha256(key: &[u8], message: &[u8]) -> [u8; 32] {
    let mut mac = <HmacSha256 as Mac>::new_from_slice(key)
        .expect("HMAC accepts keys of any length");
    mac.update(message);
    mac.finalize().into_bytes().into()
}

/// Encrypts a block of one or two sender keys (16 or 32 bytes) for one
/// recipient with AES-128-CBC, no padding. Output length equals input
/// length.
pub fn wrap_sender_keys(
    key_block: &[u8],
    pairwise: &PairwiseKey,
    iv: &[u8; 16],
) -> Result<Vec<u8>, CryptoError> {
    check_key_block_len(key_block.len())?;
    let mut buf = key_block.to_vec();
    let len = buf.len();
    Aes128CbcEnc::new(pairwise.as_bytes().into(), iv.into())
        .encrypt_padded_mut::<NoPadding>(&mut buf, len)
        .expect("length was checked to be a whole number of blocks");
    Ok(buf)
}

/// Decrypts a KEYS record value (16 or 32 bytes) and splits it into the
/// current and optional previous sender key.
pub fn unwrap_sender_keys(
    ciphertext: &[u8],
    pairwise: &PairwiseKey,
    iv: &[u8; 16],
) -> Result<UnwrappedKeys, CryptoError> {
    check_key_block_len(ciphertext.len())?;
    let mut buf = ciphertext.to_vec();
    Aes128CbcDec::new(pairwise.as_bytes().into(), iv.into())
        .decrypt_padded_mut::<NoPadding>(&mut buf)
        .expect("length was checked to be a whole number of blocks");
    let current = SenderKey(buf[..SENDER_KEY_LEN].try_into().unwrap());
    let previous = if buf.len() == 2 * SENDER_KEY_LEN {
        Some(SenderKey(buf[SENDER_KEY_LEN..].try_into().unwrap()))
    } else {
        None
    };
    Ok(UnwrappedKeys { current, previous })
}

fn check_key_block_len(len: usize) -> Result<(), CryptoError> {
    if len == SENDER_KEY_LEN || len == 2 * SENDER_KEY_LEN {
        Ok(())
    } else {
        Err(CryptoError::BadKeyBlockLength(len))
    }
}

/// Encrypts a payload with AES-128-CTR. The counter block is the 12-byte
/// nonce followed by a 32-bit big-endian block counter starting at zero.
pub fn encrypt_payload(plaintext: &[u8], key: &SenderKey, nonce: &[u8; PAYLOAD_NONCE_LEN]) -> Vec<u8> {
    let mut iv = [0u8; 16];
    iv[..PAYLOAD_NONCE_LEN].copy_from_slice(nonce);
    let mut buf = plaintext.to_vec();
    Aes128Ctr::new(key.as_bytes().into(), &iv.into()).apply_keystream(&mut buf);
    buf
}

/// Decrypts a payload. CTR mode is its own inverse, so this is
/// [`encrypt_payload`] under a name that says what the caller means.
pub fn decrypt_payload(ciphertext: &[u8], key: &SenderKey, nonce: &[u8; PAYLOAD_NONCE_LEN]) -> Vec<u8> {
    encrypt_payload(ciphertext, key, nonce)
}

/// Signs a message body (the signed span of the wire message) as
/// `Ed25519(sign_key, "strongvelopesig" || body)`.
pub fn sign_message(body: &[u8], keys: &SignKeyPair) -> [u8; SIGNATURE_LEN] {
    let mut message = Vec::with_capacity(SIGNATURE_MAGIC.len() + body.len());
    message.extend_from_slice(SIGNATURE_MAGIC);
    message.extend_from_slice(body);
    keys.signing.sign(&message).to_bytes()
}

/// Verifies a message signature. Returns `false` for anything short of a
/// valid signature by the given key: wrong length, undecodable public key,
/// or a signature over different bytes.
pub fn verify_message(body: &[u8], signature: &[u8], signer_public: &[u8; 32]) -> bool {
    let Ok(sig_bytes) = <[u8; SIGNATURE_LEN]>::try_from(signature) else {
        return false;
    };
    let Ok(verifying) = VerifyingKey::from_bytes(signer_public) else {
        return false;
    };
    let mut message = Vec::with_capacity(SIGNATURE_MAGIC.len() + body.len());
    message.extend_from_slice(SIGNATURE_MAGIC);
    message.extend_from_slice(body);
    verifying
        .verify_strict(&message, &Signature::from_bytes(&sig_bytes))
        .is_ok()
}
