# causal-var test suite
