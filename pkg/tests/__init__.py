"""Tests for Cellfree Sim."""
