"""X.509 helpers for domain registration.

Registration requests carry a certificate whose chain must anchor in
one of the server's configured roots and whose subject alternative
names must cover the page's host.  Ed25519 keys are used throughout,
matching the signature scheme of the rest of the protocol.
"""

from __future__ import annotations

import datetime
from pathlib import Path

from cryptography import x509
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.x509.oid import NameOID


class CertificateInvalid(Exception):
    pass


class DomainMismatch(Exception):
    pass


def _name(common_name: str) -> x509.Name:
    return x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, common_name)])


def generate_ca(common_name: str = "ptkit test root"):
    """Create a self-signed Ed25519 root usable as a trust anchor."""
    key = Ed25519PrivateKey.generate()
    now = datetime.datetime.now(datetime.timezone.utc)
    cert = (
        x509.CertificateBuilder()
        .subject_name(_name(common_name))
        .issuer_name(_name(common_name))
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now - datetime.timedelta(minutes=5))
        .not_valid_after(now + datetime.timedelta(days=3650))
        .add_extension(x509.BasicConstraints(ca=True, path_length=0), critical=True)
        .sign(key, algorithm=None)
    )
    return key, cert


def issue_certificate(ca_key: Ed25519PrivateKey, ca_cert: x509.Certificate,
                      hostnames: list[str], key: Ed25519PrivateKey | None = None,
                      days: int = 365):
    """Issue a leaf certificate for the given hostnames, signed by the CA."""
    if not hostnames:
        raise ValueError("at least one hostname required")
    key = key or Ed25519PrivateKey.generate()
    now = datetime.datetime.now(datetime.timezone.utc)
    cert = (
        x509.CertificateBuilder()
        .subject_name(_name(hostnames[0]))
        .issuer_name(ca_cert.subject)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now - datetime.timedelta(minutes=5))
        .not_valid_after(now + datetime.timedelta(days=days))
        .add_extension(
            x509.SubjectAlternativeName([x509.DNSName(h) for h in hostnames]),
            critical=False,
        )
        .sign(ca_key, algorithm=None)
    )
    return key, cert


def cert_to_pem(cert: x509.Certificate) -> str:
    return cert.public_bytes(serialization.Encoding.PEM).decode()


def cert_from_pem(pem: str | bytes) -> x509.Certificate:
    if isinstance(pem, str):
        pem = pem.encode()
    try:
        return x509.load_pem_x509_certificate(pem)
    except ValueError as exc:
        raise CertificateInvalid(f"unparseable certificate: {exc}") from exc


def key_to_pem(key: Ed25519PrivateKey) -> str:
    return key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    ).decode()


def key_from_pem(pem: str | bytes) -> Ed25519PrivateKey:
    if isinstance(pem, str):
        pem = pem.encode()
    key = serialization.load_pem_private_key(pem, password=None)
    if not isinstance(key, Ed25519PrivateKey):
        raise CertificateInvalid("expected an Ed25519 private key")
    return key


def load_roots(paths: list[str | Path]) -> list[x509.Certificate]:
    return [cert_from_pem(Path(p).read_bytes()) for p in paths]


def certificate_hostnames(cert: x509.Certificate) -> list[str]:
    try:
        san = cert.extensions.get_extension_for_class(x509.SubjectAlternativeName)
        return san.value.get_values_for_type(x509.DNSName)
    except x509.ExtensionNotFound:
        cn = cert.subject.get_attributes_for_oid(NameOID.COMMON_NAME)
        return [attr.value for attr in cn]


def verify_chain(cert: x509.Certificate, roots: list[x509.Certificate],
                 hostname: str | None = None) -> None:
    """Check the certificate anchors in a configured root, is within its
    validity window, and (if given) covers the hostname.

    Raises CertificateInvalid or DomainMismatch.
    """
    now = datetime.datetime.now(datetime.timezone.utc)
    if not (cert.not_valid_before_utc <= now <= cert.not_valid_after_utc):
        raise CertificateInvalid("certificate outside its validity window")

    for root in roots:
        if cert.issuer != root.subject:
            continue
        public_key = root.public_key()
        if not isinstance(public_key, Ed25519PublicKey):
            continue
        try:
            public_key.verify(cert.signature, cert.tbs_certificate_bytes)
        except InvalidSignature:
            continue
        break
    else:
        raise CertificateInvalid("certificate does not chain to a configured root")

    if hostname is not None and hostname not in certificate_hostnames(cert):
        raise DomainMismatch(f"certificate does not cover host {hostname!r}")
