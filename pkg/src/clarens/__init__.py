"""Secure XML-RPC gateway: certificate sessions, VO/ACL authorization,
ternary-tree DN matching and restart-surviving persistence."""

__version__ = "0.1.0"
