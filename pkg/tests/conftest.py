import hypothesis

# deterministic property tests: same examples on every run
hypothesis.settings.register_profile(
    "ci", max_examples=60, deadline=None, derandomize=True
)
hypothesis.settings.load_profile("ci")
