"""Control activations, vehicle models and the lifting operators built on them."""
