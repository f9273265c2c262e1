"""Pydantic models for simulation, protocol, candidates and evaluation."""
