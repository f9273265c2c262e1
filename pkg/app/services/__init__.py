"""Service layer: simulation, sandbox, oracles, generation and orchestration."""
