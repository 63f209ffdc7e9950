"""HTTP service exposing the portfolio experiments as stateless endpoints."""
