"""Joint communication, computing and control resource allocation for sensing-to-actuation loops."""
