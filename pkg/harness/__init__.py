# Command-line harness: data generation, fitting, mixture export and experiments
# Commands, configuration, file I/O and simulation scenarios
