"""Tests for Recall Notebook Backend."""
