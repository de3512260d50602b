# Shared errors, file and logging helpers
