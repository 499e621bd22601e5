import hypothesis

hypothesis.settings.register_profile(
    "det",
    derandomize=True,
    deadline=None,
    max_examples=50,
)
hypothesis.settings.load_profile("det")
