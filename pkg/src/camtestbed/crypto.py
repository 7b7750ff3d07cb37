"""Key agreement and stream cipher used by the proprietary streaming ceremony.

The camera and the app derive the same AES-128 key and IV from the owner's
password and a public nonce::

    secret   = SHA-256(password)
    key      = SHA-256(secret || nonce)[:16]
    iv       = SHA-256(nonce || secret)[:16]
    response = SHA-256(key || nonce)
"""
from __future__ import annotations

import hashlib
import hmac

from cryptography.hazmat.primitives import padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

NONCE_LEN = 16
KEY_LEN = 16


def account_secret(password: str) -> bytes:
    return hashlib.sha256(password.encode("utf-8")).digest()


def derive_session_keys(secret: bytes, nonce: bytes) -> tuple[bytes, bytes]:
    key = hashlib.sha256(secret + nonce).digest()[:KEY_LEN]
    iv = hashlib.sha256(nonce + secret).digest()[:KEY_LEN]
    return key, iv


def response_tag(key: bytes, nonce: bytes) -> bytes:
    return hashlib.sha256(key + nonce).digest()


def check_response(key: bytes, nonce: bytes, response: bytes) -> bool:
    return hmac.compare_digest(response_tag(key, nonce), response)


def cbc_encrypt(key: bytes, iv: bytes, plaintext: bytes) -> bytes:
    padder = padding.PKCS7(128).padder()
    padded = padder.update(plaintext) + padder.finalize()
    enc = Cipher(algorithms.AES(key), modes.CBC(iv)).encryptor()
    return enc.update(padded) + enc.finalize()


def cbc_decrypt(key: bytes, iv: bytes, ciphertext: bytes) -> bytes:
    """Inverse of :func:`cbc_encrypt`; ValueError on bad length or padding."""
    if not ciphertext or len(ciphertext) % 16:
        raise ValueError("ciphertext is not a whole number of blocks")
    dec = Cipher(algorithms.AES(key), modes.CBC(iv)).decryptor()
    padded = dec.update(ciphertext) + dec.finalize()
    unpadder = padding.PKCS7(128).unpadder()
    return unpadder.update(padded) + unpadder.finalize()
